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

#ifndef MFFCN_FFT_HPP_
#define MFFCN_FFT_HPP_

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace mffcn {

// Real-input DFT of a fixed length n, one-sided output (n/2 + 1 bins):
//   X[k] = sum_t x[t] exp(-2 pi i k t / n)
// Backed by FFTW. An instance owns scratch buffers, so share one across
// threads only with external locking; separate instances are independent.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  ~RealFft();

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // Shorter input is zero-padded to n.
  void forward(std::span<const double> input,
               std::span<std::complex<double>> output);
  // Inverse of forward(), including the 1/n normalization.
  void inverse(std::span<const std::complex<double>> input,
               std::span<double> output);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mffcn

#endif  // MFFCN_FFT_HPP_
