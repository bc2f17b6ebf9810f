#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace asncfl {

// Flat parameter or update vector. Non-empty, every entry finite.
class ParamVector {
 public:
  explicit ParamVector(std::vector<double> values);
  static ParamVector zeros(std::size_t n);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vec() const { return values_; }

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double alpha);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double alpha, ParamVector v);

double dot(const ParamVector& u, const ParamVector& v);
double norm(const ParamVector& v);

// <u,v> / (|u||v|). Throws DegenerateVectorError on a zero-norm input.
double cosine_similarity(const ParamVector& u, const ParamVector& v);

// Pairwise cosine similarities of client updates; row i belongs to
// client_ids[i]. Each off-diagonal pair is computed once and mirrored.
class SimilarityMatrix {
 public:
  SimilarityMatrix(std::vector<int> client_ids, std::vector<double> entries);

  std::size_t size() const { return client_ids_.size(); }
  double at(std::size_t i, std::size_t j) const {
    return entries_[i * client_ids_.size() + j];
  }
  const std::vector<int>& client_ids() const { return client_ids_; }
  const std::vector<double>& entries() const { return entries_; }
  // Row index of a client id; throws if absent.
  std::size_t index_of(int client_id) const;

 private:
  std::vector<int> client_ids_;
  std::vector<double> entries_;
};

SimilarityMatrix similarity_matrix(std::span<const ParamVector> updates,
                                   std::span<const int> ids);

}  // namespace asncfl
