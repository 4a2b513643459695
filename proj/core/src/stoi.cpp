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

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "mffcn/errors.hpp"
#include "mffcn/eval.hpp"
#include "mffcn/fft.hpp"

namespace mffcn {

namespace {

constexpr int kStoiRate = 10000;
constexpr std::size_t kStoiFrame = 256;
constexpr std::size_t kStoiHop = kStoiFrame / 2;
constexpr std::size_t kStoiFft = 512;
constexpr std::size_t kBands = 15;
constexpr double kMinBandHz = 150.0;
constexpr std::size_t kSegment = 30;  // 384 ms of 12.8 ms hops
constexpr double kBetaDb = -15.0;
constexpr double kDynamicRangeDb = 40.0;

// Zeroth-order modified Bessel function of the first kind (power series).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Periodic-free (symmetric) Hann of length n + 2 with both zero endpoints
// dropped, i.e. no zero taps.
std::vector<double> inner_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                static_cast<double>(i + 1) /
                                static_cast<double>(n + 1));
  }
  return w;
}

std::vector<double> to_double(const AudioClip& clip, const char* what) {
  if (clip.sample_rate_hz != kSampleRate) {
    throw ConfigError(std::string(what) + " must be sampled at 16000 Hz");
  }
  std::vector<double> x(clip.samples.begin(), clip.samples.end());
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(what) + " contains non-finite samples");
    }
  }
  return x;
}

// Windowed frames starting every hop while a full frame *and* one more hop
// remain, matching the reference framing.
std::size_t frame_count(std::size_t length, std::size_t frame,
                        std::size_t hop) {
  return length > frame ? (length - frame - 1) / hop + 1 : 0;
}

// Drops frames of x quieter than (loudest - 40 dB) and applies the same mask
// to y; survivors are overlap-added back into signals.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const std::vector<double> w = inner_hann(kStoiFrame);
  const std::size_t n = frame_count(x.size(), kStoiFrame, kStoiHop);
  std::vector<double> energy(n);
  for (std::size_t f = 0; f < n; ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kStoiFrame; ++i) {
      const double v = w[i] * x[f * kStoiHop + i];
      acc += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(acc) +
                                  std::numeric_limits<double>::epsilon());
  }
  const double loudest =
      n ? *std::max_element(energy.begin(), energy.end()) : 0.0;
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < n; ++f) {
    if (loudest - kDynamicRangeDb - energy[f] < 0.0) keep.push_back(f);
  }
  if (keep.empty()) {
    x.clear();
    y.clear();
    return;
  }
  const std::size_t len = (keep.size() - 1) * kStoiHop + kStoiFrame;
  std::vector<double> xs(len, 0.0), ys(len, 0.0);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const std::size_t src = keep[j] * kStoiHop, dst = j * kStoiHop;
    for (std::size_t i = 0; i < kStoiFrame; ++i) {
      xs[dst + i] += w[i] * x[src + i];
      ys[dst + i] += w[i] * y[src + i];
    }
  }
  x = std::move(xs);
  y = std::move(ys);
}

// Third-octave band envelopes: [bands][frames].
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  static const std::vector<std::pair<std::size_t, std::size_t>> edges = [] {
    const std::size_t bins = kStoiFft / 2 + 1;
    auto nearest = [&](double hz) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * kStoiRate / kStoiFft;
        const double d = (f - hz) * (f - hz);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      return best;
    };
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t b = 0; b < kBands; ++b) {
      const double k = static_cast<double>(b);
      e.emplace_back(nearest(kMinBandHz * std::pow(2.0, (2 * k - 1) / 6.0)),
                     nearest(kMinBandHz * std::pow(2.0, (2 * k + 1) / 6.0)));
    }
    return e;
  }();
  const std::vector<double> w = inner_hann(kStoiFrame);
  const std::size_t n = frame_count(x.size(), kStoiFrame, kStoiHop);
  RealFft fft(kStoiFft);
  std::vector<double> frame(kStoiFrame);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<std::vector<double>> env(kBands, std::vector<double>(n));
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t i = 0; i < kStoiFrame; ++i) {
      frame[i] = w[i] * x[f * kStoiHop + i];
    }
    fft.forward(frame, spec);
    for (std::size_t b = 0; b < kBands; ++b) {
      double acc = 0.0;
      for (std::size_t k = edges[b].first; k < edges[b].second; ++k) {
        acc += std::norm(spec[k]);
      }
      env[b][f] = std::sqrt(acc);
    }
  }
  return env;
}

double norm2(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += v[i] * v[i];
  return std::sqrt(acc);
}

}  // namespace

std::vector<double> resample_poly(const std::vector<double>& x,
                                  std::size_t up, std::size_t down) {
  if (up == 0 || down == 0) throw ConfigError("resample_poly: zero factor");
  const std::size_t g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return x;
  const std::size_t rate = std::max(up, down);
  const std::size_t half = 10 * rate;
  const std::size_t taps = 2 * half + 1;
  const double cutoff = 1.0 / static_cast<double>(rate);  // of Nyquist
  const double beta = 5.0;
  std::vector<double> h(taps);
  double dc = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - static_cast<double>(half);
    const double arg = std::numbers::pi * cutoff * m;
    const double sinc = m == 0.0 ? 1.0 : std::sin(arg) / arg;
    const double r = m / static_cast<double>(half);
    const double kaiser =
        bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) /
        bessel_i0(beta);
    h[i] = cutoff * sinc * kaiser;
    dc += h[i];
  }
  for (double& v : h) v *= static_cast<double>(up) / dc;

  const std::size_t out_len = (x.size() * up + down - 1) / down;
  std::vector<double> y(out_len, 0.0);
  for (std::size_t k = 0; k < out_len; ++k) {
    // Output k sits at upsampled index t = k * down; input i contributes
    // through tap t - i * up + half.
    const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(k * down);
    const std::ptrdiff_t lo = (t - static_cast<std::ptrdiff_t>(half) +
                               static_cast<std::ptrdiff_t>(up) - 1) /
                              static_cast<std::ptrdiff_t>(up);
    const std::ptrdiff_t hi = (t + static_cast<std::ptrdiff_t>(half)) /
                              static_cast<std::ptrdiff_t>(up);
    double acc = 0.0;
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
         i <= hi && i < static_cast<std::ptrdiff_t>(x.size()); ++i) {
      acc += x[static_cast<std::size_t>(i)] *
             h[static_cast<std::size_t>(t - i * static_cast<std::ptrdiff_t>(up) +
                                        static_cast<std::ptrdiff_t>(half))];
    }
    y[k] = acc;
  }
  return y;
}

double stoi(const AudioClip& clean, const AudioClip& processed) {
  if (clean.samples.size() != processed.samples.size()) {
    throw ConfigError("stoi: clips differ in length (" +
                      std::to_string(clean.samples.size()) + " vs " +
                      std::to_string(processed.samples.size()) + ")");
  }
  std::vector<double> x = resample_poly(to_double(clean, "clean"), 5, 8);
  std::vector<double> y = resample_poly(to_double(processed, "processed"), 5, 8);
  if (norm2(x.data(), x.size()) == 0.0) {
    throw NumericError("stoi: the clean reference is silent");
  }
  remove_silent_frames(x, y);
  const auto xe = band_envelopes(x);
  const auto ye = band_envelopes(y);
  const std::size_t frames = xe.empty() ? 0 : xe[0].size();
  if (frames < kSegment) {
    throw ConfigError("stoi: need at least 30 non-silent frames (384 ms at "
                      "10 kHz), got " + std::to_string(frames));
  }

  const double clip = 1.0 + std::pow(10.0, -kBetaDb / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(kSegment), ys(kSegment);
  for (std::size_t m = kSegment; m <= frames; ++m) {
    for (std::size_t b = 0; b < kBands; ++b) {
      const double* xb = xe[b].data() + (m - kSegment);
      const double* yb = ye[b].data() + (m - kSegment);
      const double nx = norm2(xb, kSegment), ny = norm2(yb, kSegment);
      const double scale = ny > 0.0 ? nx / ny : 0.0;
      for (std::size_t j = 0; j < kSegment; ++j) {
        xs[j] = xb[j];
        ys[j] = std::min(yb[j] * scale, xb[j] * clip);
      }
      const double mx =
          std::accumulate(xs.begin(), xs.end(), 0.0) / kSegment;
      const double my =
          std::accumulate(ys.begin(), ys.end(), 0.0) / kSegment;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t j = 0; j < kSegment; ++j) {
        const double a = xs[j] - mx, c = ys[j] - my;
        sxy += a * c;
        sxx += a * a;
        syy += c * c;
      }
      const double denom = std::sqrt(sxx) * std::sqrt(syy);
      total += denom > 0.0 ? sxy / denom : 0.0;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace mffcn
