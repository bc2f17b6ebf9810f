#include "asncfl/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "asncfl/errors.hpp"

namespace asncfl {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw InvalidArgument("FFT length must be >= 2");
  std::lock_guard lock(plan_mutex());
  double* real = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  inverse_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(real);
  fftw_free(spec);
}

RealFft::~RealFft() {
  std::lock_guard lock(plan_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void RealFft::forward(std::span<const double> in,
                      std::vector<std::complex<double>>& out) const {
  if (in.size() != n_) throw ShapeError("FFT input length mismatch");
  std::vector<double> buf(in.begin(), in.end());
  out.assign(bins(), {});
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), buf.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::vector<double>& out) const {
  if (in.size() != bins()) throw ShapeError("inverse FFT input length mismatch");
  // c2r destroys its input.
  std::vector<std::complex<double>> buf(in.begin(), in.end());
  out.assign(n_, 0.0);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(buf.data()), out.data());
}

std::vector<double> convolve_truncated(std::span<const double> a,
                                       std::span<const double> b,
                                       std::size_t length) {
  std::vector<double> out(length, 0.0);
  if (a.empty() || b.empty() || length == 0) return out;
  const std::size_t full = a.size() + b.size() - 1;
  std::size_t n = 1;
  while (n < full) n <<= 1;
  RealFft fft(n);
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  std::vector<std::complex<double>> fa, fb;
  fft.forward(pa, fa);
  fft.forward(pb, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> y;
  fft.inverse(fa, y);
  const double scale = 1.0 / static_cast<double>(n);
  const std::size_t m = std::min(length, full);
  for (std::size_t i = 0; i < m; ++i) out[i] = y[i] * scale;
  return out;
}

}  // namespace asncfl
