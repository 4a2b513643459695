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

#ifndef MFFCN_SYNTH_HPP_
#define MFFCN_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mffcn/dsp.hpp"

// Deterministic speech-like stand-in data: harmonic "voices" with syllabic
// amplitude modulation, filtered-white or tonal interference, and a
// moving-ellipse mouth whose opening follows the voice envelope.

namespace mffcn {

enum class NoiseKind { kBroadband, kTonal };

struct SynthConfig {
  double snr_low_db = -10.0;
  double snr_high_db = 10.0;
  NoiseKind noise = NoiseKind::kBroadband;
};

struct SynthClip {
  AudioClip clean;
  AudioClip noise;
  std::vector<Image> frames;  // 25 fps, 96 x 96, values in [0, 1]
  std::vector<double> envelope;  // voice envelope per video frame
};

// Number of audio samples / video frames covering `segments` whole
// segments.
std::size_t synth_samples(std::size_t segments);
std::size_t synth_frames(std::size_t segments);

// One clip spanning `segments` 20-frame segments, fully determined by seed.
SynthClip synth_clip(std::uint64_t seed, std::size_t segments,
                     NoiseKind noise = NoiseKind::kBroadband);

// n_items single-segment triples with SNRs drawn uniformly from the
// configured range. Item i depends only on (seed, i); generation runs on up
// to MFFCN_THREADS threads.
std::vector<SegmentTriple> synth_dataset(std::uint64_t seed,
                                         std::size_t n_items,
                                         const SynthConfig& config = {});

// Per-item SNR drawn by synth_dataset, exposed for statistics checks.
double synth_item_snr(std::uint64_t seed, std::size_t item,
                      const SynthConfig& config);

// Worker count for data preparation: MFFCN_THREADS if set (>= 1), else the
// hardware concurrency.
std::size_t data_threads();

}  // namespace mffcn

#endif  // MFFCN_SYNTH_HPP_
