#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace pamlab {

// Multi-dimensional real<->complex DFT on a row-major grid. The complex
// side keeps the last axis halved (n/2+1). Forward is unnormalised
// (sum f_j e^{-i...}); backward is the unnormalised inverse. Execution is
// thread-safe, plans are built once.
class RealFft {
 public:
  explicit RealFft(std::vector<int> dims);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  const std::vector<int>& dims() const { return dims_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t complex_size() const { return complex_size_; }

  void forward(const double* in, std::complex<double>* out) const;
  // `scratch` must hold complex_size() entries; `in` is left intact.
  void backward(const std::complex<double>* in, double* out,
                std::complex<double>* scratch) const;

 private:
  std::vector<int> dims_;
  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

}  // namespace pamlab
