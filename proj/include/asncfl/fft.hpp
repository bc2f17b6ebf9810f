#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace asncfl {

// Real-to-complex and complex-to-real transforms of a fixed length, backed
// by FFTW. Plans are created under a global lock (FFTW planning is not
// thread-safe); executing a plan is.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // in.size() == size(); out resized to bins().
  void forward(std::span<const double> in,
               std::vector<std::complex<double>>& out) const;
  // Unnormalized inverse: returns size() * x for x = inverse DFT.
  void inverse(std::span<const std::complex<double>> in,
               std::vector<double>& out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

// Linear convolution of a and b truncated to the first `length` samples.
std::vector<double> convolve_truncated(std::span<const double> a,
                                       std::span<const double> b,
                                       std::size_t length);

}  // namespace asncfl
