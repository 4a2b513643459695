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

#include "mffcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "op_support.hpp"

namespace mffcn {

using detail::as_nchw;
using detail::check_axis;
using detail::ConstMatMap;
using detail::grad_of;
using detail::make_output;
using detail::MatMap;
using detail::Nchw;
using detail::recording_tape;
using detail::require_finite;

std::size_t same_ceil_extent(std::size_t input, std::size_t stride) {
  if (stride == 0) throw ConfigError("stride must be at least 1");
  return (input + stride - 1) / stride;
}

Extent2 conv_output_extent(Extent2 input, const ConvSpec& spec) {
  return {same_ceil_extent(input.height, spec.stride_h),
          same_ceil_extent(input.width, spec.stride_w)};
}

namespace {

void validate_spec(const ConvSpec& spec, const char* op) {
  if (spec.stride_h == 0 || spec.stride_w == 0) {
    throw ConfigError(std::string(op) + ": strides must be at least 1");
  }
  if (spec.kernel_h == 0 || spec.kernel_w == 0 || spec.out_channels == 0) {
    throw ConfigError(std::string(op) +
                      ": kernel extents and out_channels must be at least 1");
  }
}

// Geometry of a same-ceil strided correlation over one [C,H,W] item.
struct ConvGeometry {
  std::size_t channels, in_h, in_w, kernel_h, kernel_w, stride_h, stride_w;
  std::size_t out_h, out_w, pad_top, pad_left;

  std::size_t col_rows() const { return channels * kernel_h * kernel_w; }
  std::size_t col_cols() const { return out_h * out_w; }
};

std::size_t same_ceil_pad_before(std::size_t in, std::size_t out,
                                 std::size_t kernel, std::size_t stride) {
  std::ptrdiff_t total = static_cast<std::ptrdiff_t>((out - 1) * stride +
                                                     kernel) -
                         static_cast<std::ptrdiff_t>(in);
  return total > 0 ? static_cast<std::size_t>(total) / 2 : 0;
}

ConvGeometry make_geometry(std::size_t channels, std::size_t in_h,
                           std::size_t in_w, const ConvSpec& spec) {
  ConvGeometry g{};
  g.channels = channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel_h = spec.kernel_h;
  g.kernel_w = spec.kernel_w;
  g.stride_h = spec.stride_h;
  g.stride_w = spec.stride_w;
  g.out_h = same_ceil_extent(in_h, spec.stride_h);
  g.out_w = same_ceil_extent(in_w, spec.stride_w);
  g.pad_top = same_ceil_pad_before(in_h, g.out_h, spec.kernel_h, spec.stride_h);
  g.pad_left =
      same_ceil_pad_before(in_w, g.out_w, spec.kernel_w, spec.stride_w);
  return g;
}

// col[(c*kh + i)*kw + j][oy*out_w + ox] = x[c][oy*sh + i - pad_top][ox*sw + j - pad_left]
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = x + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        T* row = col + ((c * g.kernel_h + i) * g.kernel_w + j) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride_h + i) -
                             static_cast<std::ptrdiff_t>(g.pad_top);
          T* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.stride_w + j) -
                static_cast<std::ptrdiff_t>(g.pad_left);
            dst[ox] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.in_w))
                          ? T(0)
                          : src[xx];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into x.
template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* x) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = x + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const T* row = col + ((c * g.kernel_h + i) * g.kernel_w + j) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride_h + i) -
                             static_cast<std::ptrdiff_t>(g.pad_top);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          T* dst = plane + static_cast<std::size_t>(y) * g.in_w;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.stride_w + j) -
                static_cast<std::ptrdiff_t>(g.pad_left);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            dst[xx] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_bias(const BasicTensor<T>& bias, std::size_t channels,
                const char* op) {
  if (bias.rank() != 1) {
    throw ShapeError(std::string(op) + ": bias must be rank 1, got " +
                     shape_string(bias.shape()));
  }
  check_axis(op, "bias", 0, bias.dim(0), channels);
}

template <typename T>
void check_same_shape(const BasicTensor<T>& x, const BasicTensor<T>& y,
                      const char* op) {
  const Shape& a = x.shape();
  const Shape& b = y.shape();
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch " + shape_string(a) +
                     " vs " + shape_string(b));
  }
  for (std::size_t axis = 0; axis < a.size(); ++axis) {
    check_axis(op, "second operand", axis, b[axis], a[axis]);
  }
}

template <typename T>
T clamp_open_unit(double v) {
  const T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  return std::clamp(static_cast<T>(v), lo, hi);
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input,
                      const BasicTensor<T>& weights,
                      const BasicTensor<T>& bias, const ConvSpec& spec) {
  constexpr const char* op = "conv2d";
  validate_spec(spec, op);
  require_finite(input, op, "input");
  require_finite(weights, op, "weights");
  require_finite(bias, op, "bias");
  const Nchw in = as_nchw(input, op);
  if (weights.rank() != 4) {
    throw ShapeError("conv2d: weights must be [C_out,C_in,kh,kw], got " +
                     shape_string(weights.shape()));
  }
  check_axis(op, "weights", 0, weights.dim(0), spec.out_channels);
  check_axis(op, "weights", 1, weights.dim(1), in.channels);
  check_axis(op, "weights", 2, weights.dim(2), spec.kernel_h);
  check_axis(op, "weights", 3, weights.dim(3), spec.kernel_w);
  check_bias(bias, spec.out_channels, op);

  const ConvGeometry g = make_geometry(in.channels, in.height, in.width, spec);
  const std::size_t cout = spec.out_channels;
  const std::size_t k = g.col_rows();
  const std::size_t p = g.col_cols();
  std::vector<T> out(in.batch * cout * p);
  std::vector<T> col(k * p);
  ConstMatMap<T> w(weights.data().data(), cout, k);
  for (std::size_t b = 0; b < in.batch; ++b) {
    im2col(input.data().data() + b * in.item(), g, col.data());
    MatMap<T> y(out.data() + b * cout * p, cout, p);
    y.noalias() = w * ConstMatMap<T>(col.data(), k, p);
    for (std::size_t o = 0; o < cout; ++o) y.row(o).array() += bias.data()[o];
  }
  auto result = make_output(op, in.shape_with(cout, g.out_h, g.out_w),
                            std::move(out));

  if (auto* tape = recording_tape<T>({&input, &weights, &bias})) {
    tape->record(
        op, {input, weights, bias}, {result},
        [input, weights, bias, result, g, in, cout, k, p]() {
          auto dy_all = grad_of(result);
          std::vector<T> col(k * p);
          ConstMatMap<T> w(weights.data().data(), cout, k);
          for (std::size_t b = 0; b < in.batch; ++b) {
            ConstMatMap<T> dy(dy_all.data() + b * cout * p, cout, p);
            if (weights.requires_grad()) {
              im2col(input.data().data() + b * in.item(), g, col.data());
              MatMap<T> dw(grad_of(weights).data(), cout, k);
              dw.noalias() += dy * ConstMatMap<T>(col.data(), k, p).transpose();
            }
            if (bias.requires_grad()) {
              auto db = grad_of(bias);
              for (std::size_t o = 0; o < cout; ++o) {
                double acc = 0.0;
                for (std::size_t q = 0; q < p; ++q) acc += dy(o, q);
                db[o] += static_cast<T>(acc);
              }
            }
            if (input.requires_grad()) {
              MatMap<T> dcol(col.data(), k, p);
              dcol.noalias() = w.transpose() * dy;
              col2im_add(col.data(), g,
                         grad_of(input).data() + b * in.item());
            }
          }
        });
  }
  return result;
}

template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& input,
                                const BasicTensor<T>& weights,
                                const BasicTensor<T>& bias,
                                const ConvSpec& spec, Extent2 target) {
  constexpr const char* op = "conv_transpose2d";
  validate_spec(spec, op);
  require_finite(input, op, "input");
  require_finite(weights, op, "weights");
  require_finite(bias, op, "bias");
  const Nchw in = as_nchw(input, op);
  if (weights.rank() != 4) {
    throw ShapeError("conv_transpose2d: weights must be [C_in,C_out,kh,kw], "
                     "got " + shape_string(weights.shape()));
  }
  if (target.height == 0 || target.width == 0) {
    throw ShapeError("conv_transpose2d: target extent must be positive");
  }
  check_axis(op, "weights", 0, weights.dim(0), in.channels);
  check_axis(op, "weights", 1, weights.dim(1), spec.out_channels);
  check_axis(op, "weights", 2, weights.dim(2), spec.kernel_h);
  check_axis(op, "weights", 3, weights.dim(3), spec.kernel_w);
  check_bias(bias, spec.out_channels, op);

  // Geometry of the forward correlation being inverted: target -> input.
  const ConvGeometry g =
      make_geometry(spec.out_channels, target.height, target.width, spec);
  if (g.out_h != in.height) {
    throw ShapeError("conv_transpose2d: input axis " +
                     std::to_string(in.batched ? 2 : 1) + " (height " +
                     std::to_string(in.height) + ") is not the same-ceil "
                     "image of target height " +
                     std::to_string(target.height));
  }
  if (g.out_w != in.width) {
    throw ShapeError("conv_transpose2d: input axis " +
                     std::to_string(in.batched ? 3 : 2) + " (width " +
                     std::to_string(in.width) + ") is not the same-ceil "
                     "image of target width " +
                     std::to_string(target.width));
  }
  const std::size_t cin = in.channels;
  const std::size_t cout = spec.out_channels;
  const std::size_t k = g.col_rows();
  const std::size_t p = g.col_cols();
  const std::size_t out_item = cout * target.height * target.width;
  const std::size_t out_plane = target.height * target.width;
  std::vector<T> out(in.batch * out_item, T(0));
  std::vector<T> col(k * p);
  ConstMatMap<T> w(weights.data().data(), cin, k);
  for (std::size_t b = 0; b < in.batch; ++b) {
    MatMap<T> c(col.data(), k, p);
    c.noalias() =
        w.transpose() * ConstMatMap<T>(input.data().data() + b * in.item(),
                                       cin, p);
    T* y = out.data() + b * out_item;
    col2im_add(col.data(), g, y);
    for (std::size_t o = 0; o < cout; ++o) {
      const T bo = bias.data()[o];
      for (std::size_t q = 0; q < out_plane; ++q) y[o * out_plane + q] += bo;
    }
  }
  auto result = make_output(
      op, in.shape_with(cout, target.height, target.width), std::move(out));

  if (auto* tape = recording_tape<T>({&input, &weights, &bias})) {
    tape->record(
        op, {input, weights, bias}, {result},
        [input, weights, bias, result, g, in, cin, cout, k, p, out_item,
         out_plane]() {
          auto dy_all = grad_of(result);
          std::vector<T> dcol(k * p);
          ConstMatMap<T> w(weights.data().data(), cin, k);
          for (std::size_t b = 0; b < in.batch; ++b) {
            const T* dy = dy_all.data() + b * out_item;
            if (bias.requires_grad()) {
              auto db = grad_of(bias);
              for (std::size_t o = 0; o < cout; ++o) {
                double acc = 0.0;
                for (std::size_t q = 0; q < out_plane; ++q) {
                  acc += dy[o * out_plane + q];
                }
                db[o] += static_cast<T>(acc);
              }
            }
            if (!input.requires_grad() && !weights.requires_grad()) continue;
            im2col(dy, g, dcol.data());
            ConstMatMap<T> dc(dcol.data(), k, p);
            if (input.requires_grad()) {
              MatMap<T> dx(grad_of(input).data() + b * in.item(), cin, p);
              dx.noalias() += w * dc;
            }
            if (weights.requires_grad()) {
              MatMap<T> dw(grad_of(weights).data(), cin, k);
              dw.noalias() +=
                  ConstMatMap<T>(input.data().data() + b * in.item(), cin, p) *
                  dc.transpose();
            }
          }
        });
  }
  return result;
}

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window_h,
                         std::size_t window_w) {
  constexpr const char* op = "maxpool2d";
  require_finite(input, op, "input");
  if (window_h == 0 || window_w == 0) {
    throw ConfigError("maxpool2d: window extents must be at least 1");
  }
  const Nchw in = as_nchw(input, op);
  if (window_h > in.height) {
    throw ShapeError("maxpool2d: window height " + std::to_string(window_h) +
                     " is larger than the input height " +
                     std::to_string(in.height));
  }
  if (window_w > in.width) {
    throw ShapeError("maxpool2d: window width " + std::to_string(window_w) +
                     " is larger than the input width " +
                     std::to_string(in.width));
  }
  const std::size_t oh = same_ceil_extent(in.height, window_h);
  const std::size_t ow = same_ceil_extent(in.width, window_w);
  const std::size_t pad_top = (oh * window_h - in.height) / 2;
  const std::size_t pad_left = (ow * window_w - in.width) / 2;
  const std::size_t planes = in.batch * in.channels;
  std::vector<T> out(planes * oh * ow);
  // Flat index (into the input) of each output's maximum.
  std::vector<std::size_t> argmax(out.size());
  const T* x = input.data().data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const T* plane = x + pl * in.plane();
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = 0;
        bool found = false;
        for (std::size_t i = 0; i < window_h; ++i) {
          std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * window_h + i) -
                             static_cast<std::ptrdiff_t>(pad_top);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(in.height)) continue;
          for (std::size_t j = 0; j < window_w; ++j) {
            std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * window_w + j) -
                static_cast<std::ptrdiff_t>(pad_left);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(in.width)) {
              continue;
            }
            std::size_t idx = static_cast<std::size_t>(y) * in.width +
                              static_cast<std::size_t>(xx);
            if (!found || plane[idx] > best) {
              best = plane[idx];
              best_idx = idx;
              found = true;
            }
          }
        }
        std::size_t o = (pl * oh + oy) * ow + ox;
        out[o] = best;
        argmax[o] = pl * in.plane() + best_idx;
      }
    }
  }
  auto result = make_output(op, in.shape_with(in.channels, oh, ow),
                            std::move(out));
  if (auto* tape = recording_tape<T>({&input})) {
    tape->record(op, {input}, {result},
                 [input, result, argmax = std::move(argmax)]() {
                   auto dy = grad_of(result);
                   auto dx = grad_of(input);
                   for (std::size_t o = 0; o < dy.size(); ++o) {
                     dx[argmax[o]] += dy[o];
                   }
                 });
  }
  return result;
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormState<T>& state,
                          Mode mode) {
  constexpr const char* op = "batch_norm";
  require_finite(input, op, "input");
  require_finite(gamma, op, "gamma");
  require_finite(beta, op, "beta");
  const Nchw in = as_nchw(input, op);
  const std::size_t channels = in.channels;
  check_axis(op, "gamma", 0, gamma.size(), channels);
  check_axis(op, "beta", 0, beta.size(), channels);
  check_axis(op, "running_mean", 0, state.running_mean.size(), channels);
  check_axis(op, "running_var", 0, state.running_var.size(), channels);
  const std::size_t count = in.batch * in.plane();
  if (count == 0) {
    throw ShapeError("batch_norm: zero batch x spatial sample count");
  }

  std::vector<double> mean(channels), inv_std(channels);
  const T* x = input.data().data();
  if (mode == Mode::kTrain) {
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < in.batch; ++b) {
        const T* pl = x + b * in.item() + c * in.plane();
        for (std::size_t q = 0; q < in.plane(); ++q) s += pl[q];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < in.batch; ++b) {
        const T* pl = x + b * in.item() + c * in.plane();
        for (std::size_t q = 0; q < in.plane(); ++q) {
          const double d = pl[q] - m;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
      const double unbiased =
          count > 1 ? ss / static_cast<double>(count - 1) : var;
      rm[c] = static_cast<T>((1.0 - kBatchNormMomentum) * rm[c] +
                             kBatchNormMomentum * m);
      rv[c] = static_cast<T>((1.0 - kBatchNormMomentum) * rv[c] +
                             kBatchNormMomentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = state.running_mean.data()[c];
      inv_std[c] =
          1.0 / std::sqrt(static_cast<double>(state.running_var.data()[c]) +
                          kBatchNormEpsilon);
    }
  }

  std::vector<T> out(input.size());
  const T* gm = gamma.data().data();
  const T* bt = beta.data().data();
  for (std::size_t b = 0; b < in.batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = b * in.item() + c * in.plane();
      for (std::size_t q = 0; q < in.plane(); ++q) {
        const double xhat = (x[base + q] - mean[c]) * inv_std[c];
        out[base + q] = static_cast<T>(gm[c] * xhat + bt[c]);
      }
    }
  }
  auto result = make_output(op, input.shape(), std::move(out));

  if (auto* tape = recording_tape<T>({&input, &gamma, &beta})) {
    tape->record(
        op, {input, gamma, beta}, {result},
        [input, gamma, beta, result, in, mean = std::move(mean),
         inv_std = std::move(inv_std), mode, count]() {
          auto dy = grad_of(result);
          const T* x = input.data().data();
          const std::size_t channels = in.channels;
          for (std::size_t c = 0; c < channels; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t b = 0; b < in.batch; ++b) {
              const std::size_t base = b * in.item() + c * in.plane();
              for (std::size_t q = 0; q < in.plane(); ++q) {
                const double xhat = (x[base + q] - mean[c]) * inv_std[c];
                sum_dy += dy[base + q];
                sum_dy_xhat += dy[base + q] * xhat;
              }
            }
            if (gamma.requires_grad()) {
              grad_of(gamma)[c] += static_cast<T>(sum_dy_xhat);
            }
            if (beta.requires_grad()) grad_of(beta)[c] += static_cast<T>(sum_dy);
            if (!input.requires_grad()) continue;
            auto dx = grad_of(input);
            const double scale = gamma.data()[c] * inv_std[c];
            const double n = static_cast<double>(count);
            for (std::size_t b = 0; b < in.batch; ++b) {
              const std::size_t base = b * in.item() + c * in.plane();
              for (std::size_t q = 0; q < in.plane(); ++q) {
                double g = dy[base + q];
                if (mode == Mode::kTrain) {
                  const double xhat = (x[base + q] - mean[c]) * inv_std[c];
                  g = g - sum_dy / n - xhat * sum_dy_xhat / n;
                }
                dx[base + q] += static_cast<T>(scale * g);
              }
            }
          }
        });
  }
  return result;
}

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, ActivationKind kind) {
  constexpr const char* op = "activation";
  require_finite(input, op, "input");
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    switch (kind) {
      case ActivationKind::kLeakyRelu:
        out[i] = v > T(0) ? v : static_cast<T>(kLeakyReluSlope * v);
        break;
      case ActivationKind::kRelu:
        out[i] = v > T(0) ? v : T(0);
        break;
      case ActivationKind::kSigmoid:
        out[i] = clamp_open_unit<T>(1.0 / (1.0 + std::exp(-double(v))));
        break;
      case ActivationKind::kTanh:
        out[i] = static_cast<T>(std::tanh(double(v)));
        break;
    }
  }
  auto result = make_output(op, input.shape(), std::move(out));
  if (auto* tape = recording_tape<T>({&input})) {
    tape->record(op, {input}, {result}, [input, result, kind]() {
      auto dy = grad_of(result);
      auto dx = grad_of(input);
      auto x = input.data();
      auto y = result.data();
      for (std::size_t i = 0; i < dy.size(); ++i) {
        switch (kind) {
          case ActivationKind::kLeakyRelu:
            dx[i] += x[i] > T(0) ? dy[i]
                                 : static_cast<T>(kLeakyReluSlope * dy[i]);
            break;
          case ActivationKind::kRelu:
            if (x[i] > T(0)) dx[i] += dy[i];
            break;
          case ActivationKind::kSigmoid:
            dx[i] += dy[i] * y[i] * (T(1) - y[i]);
            break;
          case ActivationKind::kTanh:
            dx[i] += dy[i] * (T(1) - y[i] * y[i]);
            break;
        }
      }
    });
  }
  return result;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> softmax_pair(
    const BasicTensor<T>& a, const BasicTensor<T>& b) {
  constexpr const char* op = "softmax_pair";
  require_finite(a, op, "first input");
  require_finite(b, op, "second input");
  if (a.size() != b.size()) {
    throw ShapeError("softmax_pair: length mismatch " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  check_same_shape(a, b, op);
  std::vector<T> wa(a.size()), wb(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double av = a.data()[i], bv = b.data()[i];
    const double m = std::max(av, bv);
    const double ea = std::exp(av - m), eb = std::exp(bv - m);
    // Kept strictly inside (0, 1) when T rounds a saturated weight to 0 or 1.
    wa[i] = clamp_open_unit<T>(ea / (ea + eb));
    wb[i] = clamp_open_unit<T>(eb / (ea + eb));
  }
  auto out_a = make_output(op, a.shape(), std::move(wa));
  auto out_b = make_output(op, a.shape(), std::move(wb));
  if (auto* tape = recording_tape<T>({&a, &b})) {
    tape->record(op, {a, b}, {out_a, out_b}, [a, b, out_a, out_b]() {
      auto ga = grad_of(out_a);
      auto gb = grad_of(out_b);
      auto wa = out_a.data();
      auto wb = out_b.data();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const T d = wa[i] * wb[i] * (ga[i] - gb[i]);
        if (a.requires_grad()) grad_of(a)[i] += d;
        if (b.requires_grad()) grad_of(b)[i] -= d;
      }
    });
  }
  return {out_a, out_b};
}

template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input,
                               const BasicTensor<T>& weights,
                               const BasicTensor<T>& bias) {
  constexpr const char* op = "fully_connected";
  require_finite(input, op, "input");
  require_finite(weights, op, "weights");
  require_finite(bias, op, "bias");
  if (input.rank() != 1 && input.rank() != 2) {
    throw ShapeError("fully_connected: input must be [C] or [B,C], got " +
                     shape_string(input.shape()));
  }
  if (weights.rank() != 2) {
    throw ShapeError("fully_connected: weights must be [C_out,C], got " +
                     shape_string(weights.shape()));
  }
  const bool batched = input.rank() == 2;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t cin = input.dim(batched ? 1 : 0);
  const std::size_t cout = weights.dim(0);
  check_axis(op, "weights", 1, weights.dim(1), cin);
  check_bias(bias, cout, op);
  std::vector<T> out(batch * cout);
  ConstMatMap<T> x(input.data().data(), batch, cin);
  ConstMatMap<T> w(weights.data().data(), cout, cin);
  MatMap<T> y(out.data(), batch, cout);
  y.noalias() = x * w.transpose();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) y(b, o) += bias.data()[o];
  }
  auto result = make_output(op, batched ? Shape{batch, cout} : Shape{cout},
                            std::move(out));
  if (auto* tape = recording_tape<T>({&input, &weights, &bias})) {
    tape->record(op, {input, weights, bias}, {result},
                 [input, weights, bias, result, batch, cin, cout]() {
                   ConstMatMap<T> dy(grad_of(result).data(), batch, cout);
                   if (input.requires_grad()) {
                     MatMap<T> dx(grad_of(input).data(), batch, cin);
                     dx.noalias() +=
                         dy * ConstMatMap<T>(weights.data().data(), cout, cin);
                   }
                   if (weights.requires_grad()) {
                     MatMap<T> dw(grad_of(weights).data(), cout, cin);
                     dw.noalias() +=
                         dy.transpose() *
                         ConstMatMap<T>(input.data().data(), batch, cin);
                   }
                   if (bias.requires_grad()) {
                     auto db = grad_of(bias);
                     for (std::size_t o = 0; o < cout; ++o) {
                       double acc = 0.0;
                       for (std::size_t b = 0; b < batch; ++b) acc += dy(b, o);
                       db[o] += static_cast<T>(acc);
                     }
                   }
                 });
  }
  return result;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  constexpr const char* op = "global_avg_pool";
  require_finite(input, op, "input");
  const Nchw in = as_nchw(input, op);
  std::vector<T> out(in.batch * in.channels);
  const T* x = input.data().data();
  for (std::size_t bc = 0; bc < out.size(); ++bc) {
    double acc = 0.0;
    for (std::size_t q = 0; q < in.plane(); ++q) acc += x[bc * in.plane() + q];
    out[bc] = static_cast<T>(acc / static_cast<double>(in.plane()));
  }
  auto result = make_output(
      op, in.batched ? Shape{in.batch, in.channels} : Shape{in.channels},
      std::move(out));
  if (auto* tape = recording_tape<T>({&input})) {
    tape->record(op, {input}, {result}, [input, result, in]() {
      auto dy = grad_of(result);
      auto dx = grad_of(input);
      const T inv = static_cast<T>(1.0 / static_cast<double>(in.plane()));
      for (std::size_t bc = 0; bc < dy.size(); ++bc) {
        for (std::size_t q = 0; q < in.plane(); ++q) {
          dx[bc * in.plane() + q] += dy[bc] * inv;
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> inputs) {
  constexpr const char* op = "concat_channels";
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  const Nchw first = as_nchw(inputs[0], op);
  std::vector<std::size_t> channels;
  std::size_t total = 0;
  for (const auto& x : inputs) {
    require_finite(x, op, "input");
    const Nchw v = as_nchw(x, op);
    if (v.batched != first.batched) {
      throw ShapeError("concat_channels: inputs mix batched and unbatched");
    }
    const std::size_t off = first.batched ? 1 : 0;
    if (first.batched) check_axis(op, "input", 0, v.batch, first.batch);
    check_axis(op, "input", off + 1, v.height, first.height);
    check_axis(op, "input", off + 2, v.width, first.width);
    channels.push_back(v.channels);
    total += v.channels;
  }
  const std::size_t plane = first.plane();
  std::vector<T> out(first.batch * total * plane);
  for (std::size_t b = 0; b < first.batch; ++b) {
    std::size_t c0 = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const std::size_t n = channels[i] * plane;
      const T* src = inputs[i].data().data() + b * n;
      std::copy(src, src + n, out.begin() + (b * total + c0) * plane);
      c0 += channels[i];
    }
  }
  auto result = make_output(op, first.shape_with(total, first.height,
                                                 first.width),
                            std::move(out));
  Tape<T>* tape = Tape<T>::active();
  bool any = false;
  for (const auto& x : inputs) any = any || x.requires_grad();
  if (tape && any) {
    std::vector<BasicTensor<T>> ins(inputs.begin(), inputs.end());
    tape->record(op, ins, {result},
                 [ins, result, channels, total, plane, batch = first.batch]() {
                   auto dy = grad_of(result);
                   for (std::size_t b = 0; b < batch; ++b) {
                     std::size_t c0 = 0;
                     for (std::size_t i = 0; i < ins.size(); ++i) {
                       const std::size_t n = channels[i] * plane;
                       if (ins[i].requires_grad()) {
                         auto dx = grad_of(ins[i]);
                         const T* src = dy.data() + (b * total + c0) * plane;
                         for (std::size_t q = 0; q < n; ++q) {
                           dx[b * n + q] += src[q];
                         }
                       }
                       c0 += channels[i];
                     }
                   }
                 });
  }
  return result;
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& input, std::size_t begin,
                              std::size_t count) {
  constexpr const char* op = "slice_channels";
  require_finite(input, op, "input");
  const Nchw in = as_nchw(input, op);
  if (count == 0 || begin + count > in.channels) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") outside channel axis " +
                     "of extent " + std::to_string(in.channels));
  }
  const std::size_t plane = in.plane();
  std::vector<T> out(in.batch * count * plane);
  for (std::size_t b = 0; b < in.batch; ++b) {
    const T* src = input.data().data() + (b * in.channels + begin) * plane;
    std::copy(src, src + count * plane, out.begin() + b * count * plane);
  }
  auto result = make_output(op, in.shape_with(count, in.height, in.width),
                            std::move(out));
  if (auto* tape = recording_tape<T>({&input})) {
    tape->record(op, {input}, {result},
                 [input, result, in, begin, count, plane]() {
                   auto dy = grad_of(result);
                   auto dx = grad_of(input);
                   for (std::size_t b = 0; b < in.batch; ++b) {
                     T* dst = dx.data() + (b * in.channels + begin) * plane;
                     const T* src = dy.data() + b * count * plane;
                     for (std::size_t q = 0; q < count * plane; ++q) {
                       dst[q] += src[q];
                     }
                   }
                 });
  }
  return result;
}

template <typename T>
BasicTensor<T> scale_channels(const BasicTensor<T>& x,
                              const BasicTensor<T>& w) {
  constexpr const char* op = "scale_channels";
  require_finite(x, op, "input");
  require_finite(w, op, "weights");
  const Nchw in = as_nchw(x, op);
  const Shape want =
      in.batched ? Shape{in.batch, in.channels} : Shape{in.channels};
  if (w.shape() != want) {
    throw ShapeError("scale_channels: weights must be " + shape_string(want) +
                     " for input " + shape_string(x.shape()) + ", got " +
                     shape_string(w.shape()));
  }
  const std::size_t plane = in.plane();
  std::vector<T> out(x.size());
  for (std::size_t bc = 0; bc < w.size(); ++bc) {
    const T s = w.data()[bc];
    for (std::size_t q = 0; q < plane; ++q) {
      out[bc * plane + q] = x.data()[bc * plane + q] * s;
    }
  }
  auto result = make_output(op, x.shape(), std::move(out));
  if (auto* tape = recording_tape<T>({&x, &w})) {
    tape->record(op, {x, w}, {result}, [x, w, result, plane]() {
      auto dy = grad_of(result);
      for (std::size_t bc = 0; bc < w.size(); ++bc) {
        if (x.requires_grad()) {
          auto dx = grad_of(x);
          const T s = w.data()[bc];
          for (std::size_t q = 0; q < plane; ++q) {
            dx[bc * plane + q] += dy[bc * plane + q] * s;
          }
        }
        if (w.requires_grad()) {
          double acc = 0.0;
          for (std::size_t q = 0; q < plane; ++q) {
            acc += static_cast<double>(dy[bc * plane + q]) *
                   x.data()[bc * plane + q];
          }
          grad_of(w)[bc] += static_cast<T>(acc);
        }
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> elementwise_mul(const BasicTensor<T>& x,
                               const BasicTensor<T>& y) {
  constexpr const char* op = "elementwise_mul";
  require_finite(x, op, "first input");
  require_finite(y, op, "second input");
  check_same_shape(x, y, op);
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x.data()[i] * y.data()[i];
  }
  auto result = make_output(op, x.shape(), std::move(out));
  if (auto* tape = recording_tape<T>({&x, &y})) {
    tape->record(op, {x, y}, {result}, [x, y, result]() {
      auto dz = grad_of(result);
      if (x.requires_grad()) {
        auto dx = grad_of(x);
        for (std::size_t i = 0; i < dz.size(); ++i) dx[i] += dz[i] * y.at(i);
      }
      if (y.requires_grad()) {
        auto dy = grad_of(y);
        for (std::size_t i = 0; i < dz.size(); ++i) dy[i] += dz[i] * x.at(i);
      }
    });
  }
  return result;
}

namespace {

template <typename T>
BasicTensor<T> add_scaled(const BasicTensor<T>& x, const BasicTensor<T>& y,
                          T sign, const char* op) {
  require_finite(x, op, "first input");
  require_finite(y, op, "second input");
  check_same_shape(x, y, op);
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x.data()[i] + sign * y.data()[i];
  }
  auto result = make_output(op, x.shape(), std::move(out));
  if (auto* tape = recording_tape<T>({&x, &y})) {
    tape->record(op, {x, y}, {result}, [x, y, result, sign]() {
      auto dz = grad_of(result);
      if (x.requires_grad()) {
        auto dx = grad_of(x);
        for (std::size_t i = 0; i < dz.size(); ++i) dx[i] += dz[i];
      }
      if (y.requires_grad()) {
        auto dy = grad_of(y);
        for (std::size_t i = 0; i < dz.size(); ++i) dy[i] += sign * dz[i];
      }
    });
  }
  return result;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& x, const BasicTensor<T>& y) {
  return add_scaled(x, y, T(1), "add");
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& x, const BasicTensor<T>& y) {
  return add_scaled(x, y, T(-1), "sub");
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  constexpr const char* op = "sum";
  require_finite(x, op, "input");
  double acc = 0.0;
  for (T v : x.data()) acc += v;
  auto result = make_output(op, Shape{1}, std::vector<T>{static_cast<T>(acc)});
  if (auto* tape = recording_tape<T>({&x})) {
    tape->record(op, {x}, {result}, [x, result]() {
      const T g = grad_of(result)[0];
      for (T& v : grad_of(x)) v += g;
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred,
                        const BasicTensor<T>& target) {
  constexpr const char* op = "mse_loss";
  require_finite(pred, op, "prediction");
  require_finite(target, op, "target");
  check_same_shape(pred, target, op);
  const double n = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.at(i)) - target.at(i);
    acc += d * d;
  }
  auto result =
      make_output(op, Shape{1}, std::vector<T>{static_cast<T>(acc / n)});
  if (auto* tape = recording_tape<T>({&pred, &target})) {
    tape->record(op, {pred, target}, {result}, [pred, target, result, n]() {
      const double g = grad_of(result)[0];
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d =
            2.0 * (static_cast<double>(pred.at(i)) - target.at(i)) / n * g;
        if (pred.requires_grad()) grad_of(pred)[i] += static_cast<T>(d);
        if (target.requires_grad()) grad_of(target)[i] -= static_cast<T>(d);
      }
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  constexpr const char* op = "reshape";
  require_finite(x, op, "input");
  if (shape_size(shape) != x.size() || shape.empty() ||
      std::find(shape.begin(), shape.end(), 0u) != shape.end()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) +
                     " as " + shape_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  auto result = make_output(op, std::move(shape), std::move(out));
  if (auto* tape = recording_tape<T>({&x})) {
    tape->record(op, {x}, {result}, [x, result]() {
      auto dy = grad_of(result);
      auto dx = grad_of(x);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    });
  }
  return result;
}

template <typename T>
BasicTensor<T> swap_last_axes(const BasicTensor<T>& x) {
  constexpr const char* op = "swap_last_axes";
  require_finite(x, op, "input");
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("swap_last_axes: expected rank 2 or 3, got " +
                     shape_string(x.shape()));
  }
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t m = x.dim(batched ? 1 : 0);
  const std::size_t n = x.dim(batched ? 2 : 1);
  std::vector<T> out(x.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out[b * m * n + j * m + i] = x.data()[b * m * n + i * n + j];
      }
    }
  }
  auto result = make_output(op, batched ? Shape{batch, n, m} : Shape{n, m},
                            std::move(out));
  if (auto* tape = recording_tape<T>({&x})) {
    tape->record(op, {x}, {result}, [x, result, batch, m, n]() {
      auto dy = grad_of(result);
      auto dx = grad_of(x);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            dx[b * m * n + i * n + j] += dy[b * m * n + j * m + i];
          }
        }
      }
    });
  }
  return result;
}

#define MFFCN_INSTANTIATE_OPS(T)                                              \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, \
                                 const BasicTensor<T>&, const ConvSpec&);     \
  template BasicTensor<T> conv_transpose2d(                                   \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      const ConvSpec&, Extent2);                                              \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&, std::size_t,       \
                                    std::size_t);                             \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&,                   \
                                     const BasicTensor<T>&,                   \
                                     const BasicTensor<T>&,                   \
                                     BatchNormState<T>&, Mode);               \
  template BasicTensor<T> activation(const BasicTensor<T>&, ActivationKind);  \
  template std::pair<BasicTensor<T>, BasicTensor<T>> softmax_pair(            \
      const BasicTensor<T>&, const BasicTensor<T>&);                          \
  template BasicTensor<T> fully_connected(                                    \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);             \
  template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);   \
  template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::size_t,  \
                                         std::size_t);                        \
  template BasicTensor<T> scale_channels(const BasicTensor<T>&,               \
                                         const BasicTensor<T>&);              \
  template BasicTensor<T> elementwise_mul(const BasicTensor<T>&,              \
                                          const BasicTensor<T>&);             \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> sum(const BasicTensor<T>&);                         \
  template BasicTensor<T> mse_loss(const BasicTensor<T>&,                     \
                                   const BasicTensor<T>&);                    \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);              \
  template BasicTensor<T> swap_last_axes(const BasicTensor<T>&);

MFFCN_INSTANTIATE_OPS(float)
MFFCN_INSTANTIATE_OPS(double)

#undef MFFCN_INSTANTIATE_OPS

}  // namespace mffcn
