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

#include "mffcn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include "mffcn/errors.hpp"

namespace mffcn {

namespace {

constexpr std::size_t kFrameSide = 96;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Library-independent draws (std distributions differ across vendors).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix(seed)) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }
  double normal() {
    // Box-Muller on (0, 1].
    const double u1 = 1.0 - uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

void scale_to_peak(std::vector<float>& x, double peak) {
  double m = 0.0;
  for (float v : x) m = std::max(m, std::abs(static_cast<double>(v)));
  if (m == 0.0) return;
  for (float& v : x) v = static_cast<float>(v * peak / m);
}

std::vector<float> make_voice(Rng& rng, std::size_t n,
                              std::vector<double>& env_out) {
  const double fs = kSampleRate;
  const double f0 = rng.uniform(90.0, 240.0);
  const double glide = rng.uniform(-0.15, 0.15);  // relative f0 drift per s
  const std::size_t n_harm = 2 + rng.below(3);
  std::vector<std::size_t> harmonics;
  while (harmonics.size() < n_harm) {
    const std::size_t h = 1 + rng.below(12);
    if (std::find(harmonics.begin(), harmonics.end(), h) == harmonics.end() &&
        h * f0 < 7000.0) {
      harmonics.push_back(h);
    }
  }
  std::vector<double> amp(n_harm), phase(n_harm);
  for (std::size_t i = 0; i < n_harm; ++i) {
    amp[i] = rng.uniform(0.3, 1.0);
    phase[i] = rng.uniform(0.0, kTwoPi);
  }
  const double am_rate = rng.uniform(2.5, 6.0);
  const double am_phase = rng.uniform(0.0, kTwoPi);
  const double depth = rng.uniform(0.6, 0.95);

  env_out.assign(n, 0.0);
  std::vector<float> x(n);
  double theta = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / fs;
    const double env =
        1.0 - depth * 0.5 * (1.0 + std::cos(kTwoPi * am_rate * time + am_phase));
    env_out[t] = env;
    theta += kTwoPi * f0 * (1.0 + glide * time) / fs;
    double s = 0.0;
    for (std::size_t i = 0; i < n_harm; ++i) {
      s += amp[i] * std::sin(static_cast<double>(harmonics[i]) * theta +
                             phase[i]);
    }
    // Breath floor keeps silent stretches from collapsing to the log floor.
    x[t] = static_cast<float>(env * s + 0.01 * rng.normal());
  }
  scale_to_peak(x, 0.3);
  return x;
}

std::vector<float> make_noise(Rng& rng, std::size_t n, NoiseKind kind) {
  std::vector<float> x(n);
  if (kind == NoiseKind::kBroadband) {
    // White noise through a random one-pole low-pass plus a leaky
    // differentiator mix: spectral tilt varies per clip.
    const double a = rng.uniform(0.0, 0.95);
    const double tilt = rng.uniform(0.0, 1.0);
    double lp = 0.0, prev = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double w = rng.normal();
      lp = a * lp + (1.0 - a) * w;
      x[t] = static_cast<float>((1.0 - tilt) * lp + tilt * (w - prev));
      prev = w;
    }
  } else {
    const std::size_t tones = 1 + rng.below(3);
    std::vector<double> f(tones), ph(tones), am(tones);
    for (std::size_t i = 0; i < tones; ++i) {
      f[i] = rng.uniform(300.0, 3500.0);
      ph[i] = rng.uniform(0.0, kTwoPi);
      am[i] = rng.uniform(0.5, 1.0);
    }
    for (std::size_t t = 0; t < n; ++t) {
      double s = 0.02 * rng.normal();
      for (std::size_t i = 0; i < tones; ++i) {
        s += am[i] * std::sin(kTwoPi * f[i] * t / kSampleRate + ph[i]);
      }
      x[t] = static_cast<float>(s);
    }
  }
  scale_to_peak(x, 0.3);
  return x;
}

Image mouth_frame(double opening, double cx, double cy, double half_width) {
  Image img{kFrameSide, kFrameSide,
            std::vector<float>(kFrameSide * kFrameSide, 0.55f)};
  const double half_height = 1.5 + 14.0 * opening;
  for (std::size_t r = 0; r < kFrameSide; ++r) {
    for (std::size_t c = 0; c < kFrameSide; ++c) {
      const double dx = (static_cast<double>(c) + 0.5 - cx) / half_width;
      const double dy = (static_cast<double>(r) + 0.5 - cy) / half_height;
      const double rho = std::sqrt(dx * dx + dy * dy);
      // Dark cavity inside a bright lip ring, soft edges.
      double v = 0.55;
      if (rho < 1.0) {
        v = 0.08;
      } else if (rho < 1.35) {
        v = 0.85 - 0.3 * (rho - 1.0) / 0.35;
      }
      img.pixels[r * kFrameSide + c] = static_cast<float>(v);
    }
  }
  return img;
}

}  // namespace

std::size_t synth_samples(std::size_t segments) {
  if (segments == 0) throw ConfigError("synth: need at least one segment");
  return kWindowLength + kHopLength * (kSegmentFrames * segments - 1);
}

std::size_t synth_frames(std::size_t segments) {
  if (segments == 0) throw ConfigError("synth: need at least one segment");
  return kVideoFramesPerSegment * segments;
}

SynthClip synth_clip(std::uint64_t seed, std::size_t segments,
                     NoiseKind noise) {
  Rng rng(seed);
  const std::size_t n = synth_samples(segments);
  SynthClip clip;
  std::vector<double> env;
  clip.clean.samples = make_voice(rng, n, env);
  clip.noise.samples = make_noise(rng, n, noise);

  const std::size_t frames = synth_frames(segments);
  const double cx0 = rng.uniform(40.0, 56.0), cy0 = rng.uniform(42.0, 54.0);
  const double sway = rng.uniform(0.0, 6.0), sway_rate = rng.uniform(0.3, 1.5);
  const double half_width = rng.uniform(20.0, 28.0);
  const double samples_per_frame = kSampleRate / kVideoFps;
  for (std::size_t f = 0; f < frames; ++f) {
    // Envelope averaged over the frame's 40 ms.
    const auto lo = static_cast<std::size_t>(f * samples_per_frame);
    const auto hi = std::min(n, static_cast<std::size_t>((f + 1) *
                                                         samples_per_frame));
    double e = 0.0;
    for (std::size_t t = lo; t < hi; ++t) e += env[t];
    e = hi > lo ? e / static_cast<double>(hi - lo) : env.back();
    clip.envelope.push_back(e);
    const double time = f / kVideoFps;
    clip.frames.push_back(mouth_frame(
        e, cx0 + sway * std::sin(kTwoPi * sway_rate * time), cy0, half_width));
  }
  return clip;
}

double synth_item_snr(std::uint64_t seed, std::size_t item,
                      const SynthConfig& config) {
  if (!(config.snr_low_db <= config.snr_high_db)) {
    throw ConfigError("SNR range must be ordered (low <= high)");
  }
  Rng rng(splitmix(seed) ^ splitmix(0x5eed0000ULL + item));
  return rng.uniform(config.snr_low_db, config.snr_high_db);
}

std::size_t data_threads() {
  if (const char* env = std::getenv("MFFCN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    throw ConfigError("MFFCN_THREADS must be a positive integer, got '" +
                      std::string(env) + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SegmentTriple> synth_dataset(std::uint64_t seed,
                                         std::size_t n_items,
                                         const SynthConfig& config) {
  if (n_items == 0) throw ConfigError("synth_dataset: n_items must be >= 1");
  std::vector<SegmentTriple> items(n_items);
  auto make = [&](std::size_t i) {
    const double snr = synth_item_snr(seed, i, config);
    const std::uint64_t item_seed = splitmix(seed) ^ splitmix(i + 1);
    SynthClip clip = synth_clip(item_seed, 1, config.noise);
    items[i] = make_segment_pairs(clip.clean, clip.noise, clip.frames, snr,
                                  "synth-" + std::to_string(i))
                   .front();
  };

  const std::size_t workers = std::min(data_threads(), n_items);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_items; ++i) make(i);
    return items;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n_items; i += workers) make(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return items;
}

}  // namespace mffcn
