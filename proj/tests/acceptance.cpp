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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mffcn/checkpoint.hpp"
#include "mffcn/dsp.hpp"
#include "mffcn/eval.hpp"
#include "mffcn/gradcheck_suite.hpp"
#include "mffcn/model.hpp"
#include "mffcn/synth.hpp"
#include "mffcn/training.hpp"

namespace mffcn {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

// 1. Every differentiable op and the width-16 model pass gradcheck across
// >= 5 seeds within 5 minutes.
Outcome gradient_suite() {
  const auto start = Clock::now();
  GradcheckOptions options;
  options.seeds = 5;
  options.width_divisor = 16;
  options.tolerance = 1e-4;
  const GradcheckReport report = run_gradcheck_suite(options);
  const double elapsed = seconds_since(start);
  print_gradcheck_table(std::cout, report);
  const GradcheckResult& worst = report.worst();
  const bool ok = report.all_passed() && elapsed < 300.0;
  return {ok, fmt("max rel-err %.3g (limit 1e-4) over %.0f seeds, %.1f s (limit 300 s)",
                  worst.max_relative_error, static_cast<double>(options.seeds), elapsed) +
                  (report.all_passed() ? "" : ", worst at " + worst.worst_entry)};
}

// 2. The executed encoder reproduces the shape trace derived from the stride
// and pool schedule, within one second.
Outcome shape_trace() {
  const std::size_t strides[10][2] = {{2, 2}, {1, 1}, {2, 2}, {1, 1}, {2, 1},
                                      {1, 1}, {2, 1}, {1, 1}, {1, 5}, {1, 1}};
  const std::size_t pools[10][2] = {{2, 4}, {1, 2}, {2, 2}, {1, 1}, {2, 1},
                                    {1, 1}, {2, 1}, {1, 1}, {1, 5}, {1, 1}};
  const std::size_t channels[10] = {64, 64, 128, 128, 256, 256, 512, 512, 1024, 1024};
  std::vector<LayerShape> audio = {{1, 80, 20}}, video = {{5, 80, 80}};
  std::size_t ah = 80, aw = 20, vh = 80, vw = 80;
  for (std::size_t k = 0; k < 10; ++k) {
    ah = (ah + strides[k][0] - 1) / strides[k][0];
    aw = (aw + strides[k][1] - 1) / strides[k][1];
    vh = (vh + pools[k][0] - 1) / pools[k][0];
    vw = (vw + pools[k][1] - 1) / pools[k][1];
    audio.push_back({channels[k], ah, aw});
    video.push_back({channels[k], vh, vw});
  }
  const auto start = Clock::now();
  const EncoderTraceReport r = run_encoder_trace(1, 0);
  const double elapsed = seconds_since(start);
  const bool match = r.audio == audio && r.video == video;
  const bool ends = r.audio.back() == LayerShape{1024, 5, 1} &&
                    r.video.back() == LayerShape{1024, 5, 1};
  std::string detail = match ? "all 22 shapes (inputs + 20 layers) match" : "layer shapes differ";
  detail += ", audio L10 " + r.audio.back().to_string() + ", video L10 " +
            r.video.back().to_string();
  return {match && ends && elapsed < 1.0,
          detail + fmt(", %.2f s (limit 1 s)", elapsed)};
}

// 3. Random fusion blocks: w_V + w_A = 1 and spectral masks in (0, 1).
Outcome attention_invariants() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<std::size_t> ch(1, 16), ext(1, 6), batch(1, 3);
  std::uniform_real_distribution<double> log_scale(-1.0, 1.5);
  double max_sum_err = 0.0;
  float min_mask = 1.0f, max_mask = 0.0f;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = ch(rng), b = batch(rng), h = ext(rng), w = ext(rng);
    const double in_scale = std::pow(10.0, log_scale(rng));
    auto make = [&](Shape shape, double scale) {
      std::uniform_real_distribution<float> u(static_cast<float>(-scale),
                                              static_cast<float>(scale));
      std::vector<float> v(shape_size(shape));
      for (float& x : v) x = u(rng);
      return Tensor(std::move(shape), std::move(v));
    };
    const ChannelAttentionParams<float> ca{
        make({c, 2 * c, 1, 1}, 1.0), make({c}, 1.0), make({c, c}, 1.0),
        make({c}, 1.0),              make({c, c}, 1.0), make({c}, 1.0),
        make({c, 2 * c, 1, 1}, 1.0), make({c}, 1.0)};
    const SpectralAttentionParams<float> sa{make({c, c, 1, 1}, 1.0), make({c}, 1.0),
                                            make({c, c, 1, 1}, 1.0), make({c}, 1.0)};
    const auto fused = channel_attention(make({b, c, h, w}, in_scale),
                                         make({b, c, h, w}, in_scale), ca);
    for (std::size_t i = 0; i < fused.video_weight.size(); ++i) {
      const double sum = static_cast<double>(fused.video_weight.at(i)) +
                         static_cast<double>(fused.audio_weight.at(i));
      max_sum_err = std::max(max_sum_err, std::fabs(sum - 1.0));
    }
    const auto masked = spectral_attention(fused.output, sa);
    for (float m : masked.mask.data()) {
      min_mask = std::min(min_mask, m);
      max_mask = std::max(max_mask, m);
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = max_sum_err < 1e-6 && min_mask > 0.0f && max_mask < 1.0f &&
                  elapsed < 60.0;
  return {ok, fmt("1000 blocks, max |w_V + w_A - 1| = %.3g (limit 1e-6), mask range "
                  "[%.9g, %.9g], %.1f s (limit 60 s)",
                  max_sum_err, min_mask, max_mask, elapsed)};
}

TrainConfig overfit_config() {
  TrainConfig c;
  c.width_divisor = 8;
  c.steps = 500;
  c.learning_rate = 2e-4;
  c.batch_size = 4;
  c.seed = 7;
  c.strategy = FusionStrategy::kMultiLayer;
  return c;
}

std::vector<SegmentTriple> overfit_data() { return synth_dataset(1, 4); }

struct OverfitRun {
  TrainResult result;
  double seconds = 0.0;
};

OverfitRun run_overfit() {
  const std::vector<SegmentTriple> data = overfit_data();
  const auto start = Clock::now();
  TrainResult r = train(overfit_config(), data, [](std::size_t step, double loss) {
    if (step == 1 || step % 100 == 0) {
      std::printf("  step %3zu  loss %.6f\n", step, loss);
      std::fflush(stdout);
    }
  });
  return {std::move(r), seconds_since(start)};
}

// 4. 500 steps on 4 items cut the loss to <= 10% of the step-1 loss.
Outcome overfit(const OverfitRun& run) {
  const auto& losses = run.result.losses;
  if (losses.size() != 500) return {false, "training did not run 500 steps"};
  const double ratio = losses.back() / losses.front();
  return {ratio <= 0.1 && run.seconds < 600.0,
          fmt("loss %.5g -> %.5g, ratio %.4f (limit 0.1), %.1f s (limit 600 s)",
              losses.front(), losses.back(), ratio, run.seconds)};
}

// 5. All five strategies train 50 steps and fill a finite 5 x 2 report.
Outcome ablation() {
  const auto start = Clock::now();
  AblationConfig c;
  c.train.width_divisor = 8;
  c.train.steps = 50;
  c.train.batch_size = 4;
  c.train.seed = 0;
  const std::vector<FusionStrategy> strategies(kAllStrategies.begin(),
                                               kAllStrategies.end());
  AblationReport r;
  try {
    r = run_ablation(c, strategies, [](const std::string& msg) {
      std::cout << "  " << msg << '\n' << std::flush;
    });
  } catch (const std::exception& e) {
    return {false, std::string("ablation aborted: ") + e.what()};
  }
  const double elapsed = seconds_since(start);
  write_ablation_table(std::cout, r);
  const bool complete = r.strategies.size() == 5 && r.snrs_db.size() == 2 &&
                        r.cells.size() == 10;
  const bool finite = r.all_finite();
  return {complete && finite && elapsed < 900.0,
          fmt("%.0f strategies x %.0f SNRs, %.0f cells", static_cast<double>(r.strategies.size()),
              static_cast<double>(r.snrs_db.size()), static_cast<double>(r.cells.size())) +
              (finite ? ", all finite" : ", NON-FINITE entries") +
              fmt(", %.1f s (limit 900 s)", elapsed)};
}

// 6. STOI: identity >= 0.99, exact gain invariance, SNR monotonicity.
Outcome stoi_consistency() {
  const auto start = Clock::now();
  double min_identity = 1.0;
  bool invariant = true;
  int monotone_seeds = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SynthClip clip = synth_clip(1000 + seed, 10);
    const AudioClip& clean = clip.clean;
    min_identity = std::min(min_identity, stoi(clean, clean));

    double previous = -2.0;
    bool monotone = true;
    for (double snr : {-5.0, 0.0, 5.0, 10.0}) {
      const AudioClip mixture = mix_at_snr(clean, clip.noise, snr).mixture;
      const double s = stoi(clean, mixture);
      monotone &= s >= previous;
      previous = s;
      if (snr == 0.0) {
        for (float k : {0.5f, 0.25f, 0.125f}) {
          AudioClip scaled = mixture;
          for (float& v : scaled.samples) v *= k;
          invariant &= stoi(clean, scaled) == s;
        }
      }
    }
    monotone_seeds += monotone ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  const bool ok = min_identity >= 0.99 && invariant && monotone_seeds >= 9 &&
                  elapsed < 60.0;
  return {ok, fmt("identity STOI min %.6f (limit 0.99), monotone on %.0f/10 seeds "
                  "(limit 9), %.1f s (limit 60 s)",
                  min_identity, monotone_seeds, elapsed) +
                  (invariant ? ", gain invariance exact" : ", gain invariance BROKEN")};
}

// 7. Segment arithmetic, SNR mixing accuracy and sinusoid bin concentration.
Outcome dsp_checks() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);

  AudioClip clip;
  clip.samples.resize(3680);
  for (float& s : clip.samples) s = u(rng);
  const auto segs = log_mel(clip);
  const bool one_segment = segs.size() == 1 &&
                           segs[0].values.shape() == Shape{80, 20} &&
                           stft(clip).frames == 20;

  double worst_db = 0.0;
  std::uniform_real_distribution<double> target(-15.0, 15.0);
  for (int trial = 0; trial < 100; ++trial) {
    AudioClip clean, noise;
    clean.samples.resize(16000);
    noise.samples.resize(16000);
    for (float& s : clean.samples) s = 0.4f * u(rng);
    for (float& s : noise.samples) s = 1.8f * u(rng);
    const double snr = target(rng);
    const MixResult m = mix_at_snr(clean, noise, snr);
    double pc = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
      const double c = clean.samples[i];
      const double n = m.mixture.samples[i] / m.normalization_scale - c;
      pc += c * c;
      pn += n * n;
    }
    worst_db = std::max(worst_db, std::fabs(10.0 * std::log10(pc / pn) - snr));
  }

  // Energy share of bin k (and of the k-1..k+1 main lobe) for a 640-sample
  // sinusoid at 16000/640 * k Hz.
  double min_bin = 1.0, min_lobe = 1.0;
  for (std::size_t k = 1; k < 320; ++k) {
    AudioClip tone;
    tone.samples.resize(kWindowLength);
    for (std::size_t n = 0; n < kWindowLength; ++n) {
      tone.samples[n] = static_cast<float>(
          0.5 * std::sin(2.0 * std::numbers::pi * static_cast<double>(k * n) /
                         static_cast<double>(kWindowLength)));
    }
    const Spectrogram s = stft(tone);
    double total = 0.0, lobe = 0.0;
    for (std::size_t b = 0; b < s.bins; ++b) {
      const double e = std::norm(s.at(b, 0));
      total += e;
      if (b + 1 >= k && b <= k + 1) lobe += e;
    }
    min_bin = std::min(min_bin, std::norm(s.at(k, 0)) / total);
    min_lobe = std::min(min_lobe, lobe / total);
  }
  const bool ok = one_segment && worst_db <= 0.01 && min_bin >= 0.99;
  return {ok, std::string(one_segment ? "3680 samples -> one 80x20 segment"
                                      : "segment arithmetic WRONG") +
                  fmt(", mix error max %.2e dB (limit 0.01), sinusoid energy in bin k "
                      "min %.4f (limit 0.99; k-1..k+1 main lobe min %.4f)",
                      worst_db, min_bin, min_lobe)};
}

// 8. Re-running criterion 4 reproduces the loss history and checkpoint bits.
Outcome determinism(const OverfitRun& first) {
  const OverfitRun second = run_overfit();
  std::ostringstream a, b;
  write_checkpoint(a, first.result.model);
  write_checkpoint(b, second.result.model);
  const bool losses = first.result.losses == second.result.losses;
  const bool checkpoint = a.str() == b.str();
  return {losses && checkpoint,
          std::string("loss history ") + (losses ? "identical" : "DIFFERS") +
              ", checkpoint (" + std::to_string(a.str().size()) + " bytes) " +
              (checkpoint ? "identical" : "DIFFERS")};
}

}  // namespace
}  // namespace mffcn

int main() {
  using namespace mffcn;
  struct Row {
    int id;
    const char* name;
    Outcome outcome;
  };
  std::vector<Row> rows;
  auto run = [&](int id, const char* name, const std::function<Outcome()>& f) {
    std::cout << "== criterion " << id << ": " << name << '\n' << std::flush;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.passed ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": "
              << o.detail << "\n\n"
              << std::flush;
    rows.push_back({id, name, o});
  };

  run(1, "gradient suite", gradient_suite);
  run(2, "shape trace", shape_trace);
  run(3, "attention invariants", attention_invariants);
  std::optional<OverfitRun> first;
  run(4, "overfit check", [&] {
    first.emplace(run_overfit());
    return overfit(*first);
  });
  run(5, "ablation harness", ablation);
  run(6, "STOI self-consistency", stoi_consistency);
  run(7, "DSP checks", dsp_checks);
  run(8, "determinism", [&] {
    if (!first) return Outcome{false, "criterion 4 did not run"};
    return determinism(*first);
  });

  std::cout << "== summary\n";
  int failed = 0;
  for (const Row& r : rows) {
    std::cout << (r.outcome.passed ? "PASS" : "FAIL") << "  [" << r.id << "] "
              << r.name << '\n';
    failed += r.outcome.passed ? 0 : 1;
  }
  std::cout << rows.size() - failed << "/" << rows.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
