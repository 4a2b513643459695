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

#ifndef MFFCN_DSP_HPP_
#define MFFCN_DSP_HPP_

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "mffcn/tensor.hpp"

// Audio/video front end: STFT, Mel filterbank, log-Mel segmentation, SNR
// mixing and frame resizing. Everything here is a pure function of its
// arguments.

namespace mffcn {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kWindowLength = 640;  // 40 ms
inline constexpr std::size_t kHopLength = 160;     // 10 ms
inline constexpr std::size_t kFftBins = kWindowLength / 2 + 1;
inline constexpr std::size_t kMelBins = 80;
inline constexpr std::size_t kSegmentFrames = 20;
inline constexpr std::size_t kVideoFramesPerSegment = 5;  // 200 ms at 25 fps
inline constexpr std::size_t kVideoSize = 80;
inline constexpr double kVideoFps = 25.0;
// Shortest clip producing one full segment: 640 + 160 * 19.
inline constexpr std::size_t kSegmentSamples =
    kWindowLength + kHopLength * (kSegmentFrames - 1);
inline constexpr double kLogMelFloor = 1e-10;
// SNRs at or above this are treated as "no noise".
inline constexpr double kNoiselessSnrDb = 100.0;

struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kSampleRate;
};

// Throws ConfigError unless the clip is non-empty, 16 kHz, with finite
// samples in [-1, 1].
void validate_clip(const AudioClip& clip);

struct SegmentOrigin {
  std::string clip_id;
  std::size_t frame_offset = 0;  // STFT frame (audio) or video frame index
};

// One 80 x 20 log-Mel chunk: values has shape [80, 20] (mel, time).
struct MelSegment {
  Tensor values;
  SegmentOrigin origin;
};

// Five 80 x 80 grayscale frames in [0, 1]: frames has shape [5, 80, 80].
struct VideoSegment {
  Tensor frames;
  SegmentOrigin origin;
};

struct SegmentTriple {
  MelSegment noisy;
  VideoSegment video;
  MelSegment clean;
  double snr_db = 0.0;
};

// Complex STFT, frame-major storage.
struct Spectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<std::complex<double>> values;

  const std::complex<double>& at(std::size_t bin, std::size_t frame) const {
    return values[frame * bins + bin];
  }
};

// Symmetric Hann window: 0.5 * (1 - cos(2 pi n / (N - 1))).
std::vector<double> hann_window(std::size_t length);

// frames = 1 + floor((len - win_len) / hop); bins = win_len / 2 + 1 (FFT size
// equals window length).
Spectrogram stft(const AudioClip& clip, std::size_t win_len = kWindowLength,
                 std::size_t hop = kHopLength);

// Energy of frame t recovered from its one-sided spectrum (Parseval):
// (|X0|^2 + 2 sum |Xk|^2 + |X_{N/2}|^2) / N for even N.
double spectral_frame_energy(const Spectrogram& spec, std::size_t frame,
                             std::size_t fft_size);

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t fft_bins = 0;
  std::vector<double> weights;     // row-major [n_mels][fft_bins]
  std::vector<double> center_hz;   // n_mels centers, increasing

  double weight(std::size_t mel, std::size_t bin) const {
    return weights[mel * fft_bins + bin];
  }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with peak 1 at centers equally spaced on the HTK mel
// scale between f_lo and f_hi.
MelFilterbank mel_filterbank(std::size_t n_mels = kMelBins,
                             std::size_t fft_bins = kFftBins,
                             double f_lo = 0.0, double f_hi = 8000.0,
                             int sample_rate_hz = kSampleRate);

// Mel power per frame: [n_mels x frames] row-major, log(mel . |X|^2 + floor).
std::vector<double> log_mel_spectrogram(const Spectrogram& spec,
                                        const MelFilterbank& bank);

// Log-Mel of the whole clip cut into non-overlapping 20-frame segments; the
// trailing partial segment is dropped.
std::vector<MelSegment> log_mel(const AudioClip& clip,
                                const std::string& clip_id = "");

struct MixResult {
  AudioClip mixture;
  double noise_scale = 0.0;          // applied to the noise before summing
  double normalization_scale = 1.0;  // < 1 when the sum had to be de-clipped
};

double mean_power(const AudioClip& clip);

// Scales noise so 10 log10(P_clean / P_noise) = snr_db, adds it to clean and
// peak-normalizes only if the sum leaves [-1, 1].
MixResult mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                     double snr_db);

struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;  // row-major

  float at(std::size_t r, std::size_t c) const {
    return pixels[r * width + c];
  }
};

// Half-pixel-centre bilinear interpolation (align_corners = false).
Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w);

// Cuts frames into 5-frame segments resized to 80 x 80 (the trailing partial
// segment is dropped). Throws ConfigError on pixels outside [0, 1].
std::vector<VideoSegment> video_segments(const std::vector<Image>& frames,
                                         const std::string& clip_id = "");

// Mixes clean and noise at snr_db, extracts noisy and clean log-Mel segments
// and pairs segment k (audio frames [20k, 20k+20)) with video frames
// [5k, 5k+5), resized to 80 x 80.
std::vector<SegmentTriple> make_segment_pairs(
    const AudioClip& clean, const AudioClip& noise,
    const std::vector<Image>& video_frames, double snr_db,
    const std::string& clip_id = "");

}  // namespace mffcn

#endif  // MFFCN_DSP_HPP_
