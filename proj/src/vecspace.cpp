#include "asncfl/vecspace.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "asncfl/errors.hpp"

namespace asncfl {

namespace {

void require_same_length(const ParamVector& u, const ParamVector& v) {
  if (u.size() != v.size()) {
    throw ShapeError("parameter vectors differ in length: " +
                     std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("ParamVector must be non-empty");
  for (double x : values_) {
    if (!std::isfinite(x)) {
      throw InvalidArgument("ParamVector entries must be finite");
    }
  }
}

ParamVector ParamVector::zeros(std::size_t n) {
  return ParamVector(std::vector<double>(n, 0.0));
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_length(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_length(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double alpha) {
  for (double& x : values_) x *= alpha;
  return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double alpha, ParamVector v) { return v *= alpha; }

double dot(const ParamVector& u, const ParamVector& v) {
  require_same_length(u, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double norm(const ParamVector& v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(const ParamVector& u, const ParamVector& v) {
  require_same_length(u, v);
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw DegenerateVectorError(-1);
  return dot(u, v) / (nu * nv);
}

SimilarityMatrix::SimilarityMatrix(std::vector<int> client_ids,
                                   std::vector<double> entries)
    : client_ids_(std::move(client_ids)), entries_(std::move(entries)) {
  if (entries_.size() != client_ids_.size() * client_ids_.size()) {
    throw ShapeError("similarity matrix is not square over its client ids");
  }
}

std::size_t SimilarityMatrix::index_of(int client_id) const {
  auto it = std::find(client_ids_.begin(), client_ids_.end(), client_id);
  if (it == client_ids_.end()) {
    throw InvalidArgument("client " + std::to_string(client_id) +
                          " not in similarity matrix");
  }
  return static_cast<std::size_t>(it - client_ids_.begin());
}

SimilarityMatrix similarity_matrix(std::span<const ParamVector> updates,
                                   std::span<const int> ids) {
  if (updates.size() != ids.size()) {
    throw ShapeError("one client id is required per update");
  }
  if (updates.empty()) throw InvalidArgument("no updates given");
  if (std::set<int>(ids.begin(), ids.end()).size() != ids.size()) {
    throw InvalidArgument("client ids must be distinct");
  }
  const std::size_t n = updates.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    require_same_length(updates[i], updates[0]);
    norms[i] = norm(updates[i]);
    if (norms[i] == 0.0) throw DegenerateVectorError(ids[i]);
  }
  std::vector<double> entries(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    entries[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = dot(updates[i], updates[j]) / (norms[i] * norms[j]);
      entries[i * n + j] = a;
      entries[j * n + i] = a;
    }
  }
  return SimilarityMatrix(std::vector<int>(ids.begin(), ids.end()),
                          std::move(entries));
}

}  // namespace asncfl
