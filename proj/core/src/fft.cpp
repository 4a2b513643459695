/* Copyright 2026 The MFFCN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mffcn/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "mffcn/errors.hpp"

namespace mffcn {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan forward_plan = nullptr;
  fftw_plan inverse_plan = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward_plan) fftw_destroy_plan(forward_plan);
    if (inverse_plan) fftw_destroy_plan(inverse_plan);
    fftw_free(real);
    fftw_free(spectrum);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n < 2) throw ConfigError("FFT length must be at least 2");
  impl_->real = fftw_alloc_real(n);
  impl_->spectrum = fftw_alloc_complex(n / 2 + 1);
  std::lock_guard<std::mutex> lock(planner_mutex());
  const int len = static_cast<int>(n);
  impl_->forward_plan = fftw_plan_dft_r2c_1d(len, impl_->real, impl_->spectrum,
                                             FFTW_ESTIMATE);
  impl_->inverse_plan = fftw_plan_dft_c2r_1d(len, impl_->spectrum, impl_->real,
                                             FFTW_ESTIMATE);
  if (!impl_->forward_plan || !impl_->inverse_plan) {
    throw ConfigError("FFTW could not plan a transform of length " +
                      std::to_string(n));
  }
}

RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;
RealFft::~RealFft() = default;

void RealFft::forward(std::span<const double> input,
                      std::span<std::complex<double>> output) {
  if (input.size() > n_ || output.size() != bins()) {
    throw ShapeError("RealFft::forward: buffer sizes do not match length " +
                     std::to_string(n_));
  }
  std::copy(input.begin(), input.end(), impl_->real);
  std::fill(impl_->real + input.size(), impl_->real + n_, 0.0);
  fftw_execute(impl_->forward_plan);
  for (std::size_t k = 0; k < bins(); ++k) {
    output[k] = {impl_->spectrum[k][0], impl_->spectrum[k][1]};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> input,
                      std::span<double> output) {
  if (input.size() != bins() || output.size() != n_) {
    throw ShapeError("RealFft::inverse: buffer sizes do not match length " +
                     std::to_string(n_));
  }
  for (std::size_t k = 0; k < bins(); ++k) {
    impl_->spectrum[k][0] = input[k].real();
    impl_->spectrum[k][1] = input[k].imag();
  }
  fftw_execute(impl_->inverse_plan);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) output[i] = impl_->real[i] * scale;
}

}  // namespace mffcn
