#include "pamlab/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace pamlab {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::vector<int> dims) : dims_(std::move(dims)) {
  real_size_ = 1;
  for (int n : dims_) real_size_ *= static_cast<std::size_t>(n);
  complex_size_ = real_size_ / static_cast<std::size_t>(dims_.back()) *
                  static_cast<std::size_t>(dims_.back() / 2 + 1);
  std::vector<double> r(real_size_);
  std::vector<std::complex<double>> c(complex_size_);
  auto* cp = reinterpret_cast<fftw_complex*>(c.data());
  const int rank = static_cast<int>(dims_.size());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard<std::mutex> lock(planner_mutex());
  forward_plan_ = fftw_plan_dft_r2c(rank, dims_.data(), r.data(), cp, flags);
  backward_plan_ = fftw_plan_dft_c2r(rank, dims_.data(), cp, r.data(), flags);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::backward(const std::complex<double>* in, double* out,
                       std::complex<double>* scratch) const {
  std::copy(in, in + complex_size_, scratch);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(backward_plan_),
                       reinterpret_cast<fftw_complex*>(scratch), out);
}

}  // namespace pamlab
