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

#ifndef MFFCN_EVAL_HPP_
#define MFFCN_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mffcn/dsp.hpp"
#include "mffcn/model.hpp"
#include "mffcn/synth.hpp"
#include "mffcn/training.hpp"

namespace mffcn {

// ---------------------------------------------------------------------------
// Metrics

// Short-time objective intelligibility in [0, 1] (can dip slightly below 0
// for anti-correlated inputs). Both clips are resampled to 10 kHz, frames
// more than 40 dB below the loudest clean frame are dropped, and clipped
// normalized envelope correlations over 384 ms windows in 15 third-octave
// bands are averaged. Throws ConfigError if the lengths differ or fewer than
// 30 frames survive, NumericError if the reference is silent.
double stoi(const AudioClip& clean, const AudioClip& processed);

// Polyphase resampling by up/down with a Kaiser-windowed sinc low-pass
// (beta 5, half length 10 * max(up, down) input-rate taps).
std::vector<double> resample_poly(const std::vector<double>& x,
                                  std::size_t up, std::size_t down);

inline constexpr double kSiSdrCapDb = 60.0;

// Scale-invariant SDR in dB, clamped to [-60, 60]. Throws ConfigError on a
// length mismatch and NumericError if either clip has zero energy.
double si_sdr(const AudioClip& clean, const AudioClip& processed);

// RMS difference of two equally shaped log-Mel maps.
double log_spectral_distance(const Tensor& a, const Tensor& b);
double log_spectral_distance(const MelSegment& a, const MelSegment& b);

// ---------------------------------------------------------------------------
// Waveform proxy
//
// The network emits log-Mel maps, not waveforms. For waveform metrics the
// noisy STFT is filtered by a per-bin gain derived from the enhanced/noisy
// mel energy ratio exp(S - Y), spread back onto FFT bins through the
// filterbank (weighted by the filter responses covering each bin; bins with
// no coverage pass unchanged), converted to an amplitude gain capped at
// +20 dB, and resynthesised by weighted overlap-add. The result covers the
// samples spanned by the given segments.
AudioClip waveform_proxy(const AudioClip& noisy,
                         const std::vector<Tensor>& enhanced_segments);

// Samples covered by `segments` whole 20-frame segments.
std::size_t covered_samples(std::size_t segments);

// ---------------------------------------------------------------------------
// Reports

struct EvalClip {
  std::string id;
  AudioClip clean;
  AudioClip noisy;
  std::vector<Image> frames;
  double snr_db = 0.0;
};

struct EvalItem {
  std::string id;
  double snr_db = 0.0;
  double stoi_percent = 0.0;
  double si_sdr_db = 0.0;
  double log_spectral_distance = 0.0;
};

struct EvalReport {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<EvalItem> items;
  double mean_stoi_percent = 0.0;
  double mean_si_sdr_db = 0.0;
  double mean_log_spectral_distance = 0.0;

  bool all_finite() const;
};

// Enhanced log-Mel segments for a clip's noisy audio and video (eval-mode
// batch norm).
std::vector<Tensor> enhance_segments(MffcnModel<float>& model,
                                     const std::vector<MelSegment>& noisy,
                                     const std::vector<VideoSegment>& video);

EvalItem evaluate_clip(MffcnModel<float>& model, const EvalClip& clip);
EvalReport evaluate(MffcnModel<float>& model, const std::vector<EvalClip>& clips,
                    std::uint64_t seed);

// Held-out synthetic clips of `segments` segments mixed at snr_db.
std::vector<EvalClip> synth_eval_clips(std::uint64_t seed, std::size_t count,
                                       std::size_t segments, double snr_db,
                                       NoiseKind noise);

void write_report_csv(std::ostream& out, const EvalReport& report);

// ---------------------------------------------------------------------------
// Fusion-strategy ablation

struct AblationConfig {
  TrainConfig train;            // strategy field is overridden per row
  std::size_t train_items = 16;
  std::size_t eval_clips = 2;   // per SNR
  std::size_t eval_segments = 10;
  std::vector<double> eval_snrs_db = {0.0, -5.0};
  NoiseKind noise = NoiseKind::kBroadband;
};

struct AblationCell {
  FusionStrategy strategy;
  double snr_db = 0.0;
  EvalReport report;
};

struct AblationReport {
  std::vector<FusionStrategy> strategies;
  std::vector<double> snrs_db;
  std::vector<AblationCell> cells;  // strategy-major
  std::vector<double> final_train_loss;  // per strategy

  const AblationCell& cell(std::size_t strategy, std::size_t snr) const {
    return cells.at(strategy * snrs_db.size() + snr);
  }
  bool all_finite() const;
};

using AblationProgress = std::function<void(const std::string& message)>;

// Trains every strategy identically (same data, seed and schedule) and
// scores each on the same held-out mixtures at every SNR.
AblationReport run_ablation(const AblationConfig& config,
                            const std::vector<FusionStrategy>& strategies,
                            const AblationProgress& progress = {});

void write_ablation_csv(std::ostream& out, const AblationReport& report);
void write_ablation_table(std::ostream& out, const AblationReport& report);

}  // namespace mffcn

#endif  // MFFCN_EVAL_HPP_
