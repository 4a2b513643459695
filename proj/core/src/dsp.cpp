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

#include "mffcn/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mffcn/errors.hpp"
#include "mffcn/fft.hpp"

namespace mffcn {

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate_hz != kSampleRate) {
    throw ConfigError("audio must be sampled at 16000 Hz, got " +
                      std::to_string(clip.sample_rate_hz));
  }
  if (clip.samples.empty()) throw ConfigError("audio clip is empty");
  for (float s : clip.samples) {
    if (!std::isfinite(s) || s < -1.0f || s > 1.0f) {
      throw ConfigError("audio samples must be finite and within [-1, 1]");
    }
  }
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / denom));
  }
  return w;
}

Spectrogram stft(const AudioClip& clip, std::size_t win_len, std::size_t hop) {
  validate_clip(clip);
  if (win_len < 2 || hop == 0) {
    throw ConfigError("stft: window length must be >= 2 and hop >= 1");
  }
  if (clip.samples.size() < win_len) {
    throw ConfigError("stft: clip of " + std::to_string(clip.samples.size()) +
                      " samples is shorter than one window (" +
                      std::to_string(win_len) + ")");
  }
  const std::vector<double> window = hann_window(win_len);
  RealFft fft(win_len);
  Spectrogram spec;
  spec.bins = fft.bins();
  spec.frames = 1 + (clip.samples.size() - win_len) / hop;
  spec.values.resize(spec.bins * spec.frames);
  std::vector<double> frame(win_len);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const float* src = clip.samples.data() + t * hop;
    for (std::size_t n = 0; n < win_len; ++n) frame[n] = src[n] * window[n];
    fft.forward(frame, std::span(spec.values).subspan(t * spec.bins,
                                                      spec.bins));
  }
  return spec;
}

double spectral_frame_energy(const Spectrogram& spec, std::size_t frame,
                             std::size_t fft_size) {
  double e = 0.0;
  for (std::size_t k = 0; k < spec.bins; ++k) {
    const double p = std::norm(spec.at(k, frame));
    const bool unpaired = k == 0 || (fft_size % 2 == 0 && k == fft_size / 2);
    e += unpaired ? p : 2.0 * p;
  }
  return e / static_cast<double>(fft_size);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t fft_bins,
                             double f_lo, double f_hi, int sample_rate_hz) {
  if (n_mels == 0 || fft_bins < 2 || n_mels >= fft_bins) {
    throw ConfigError("mel_filterbank: need 0 < n_mels < fft_bins");
  }
  const double nyquist = sample_rate_hz / 2.0;
  if (!(f_lo >= 0.0) || !(f_hi > f_lo) || f_hi > nyquist) {
    throw ConfigError("mel_filterbank: degenerate band edges [" +
                      std::to_string(f_lo) + ", " + std::to_string(f_hi) +
                      "] Hz");
  }
  const double mel_lo = hz_to_mel(f_lo);
  const double mel_hi = hz_to_mel(f_hi);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  const double hz_per_bin = nyquist / static_cast<double>(fft_bins - 1);
  MelFilterbank bank;
  bank.n_mels = n_mels;
  bank.fft_bins = fft_bins;
  bank.weights.assign(n_mels * fft_bins, 0.0);
  bank.center_hz.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    bank.center_hz[m] = centre;
    bool any = false;
    for (std::size_t k = 0; k < fft_bins; ++k) {
      const double f = hz_per_bin * static_cast<double>(k);
      double w = 0.0;
      if (f > lo && f <= centre) {
        w = (f - lo) / (centre - lo);
      } else if (f > centre && f < hi) {
        w = (hi - f) / (hi - centre);
      }
      bank.weights[m * fft_bins + k] = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw ConfigError("mel_filterbank: filter " + std::to_string(m) +
                        " covers no FFT bin; too many mel bands for the "
                        "frequency resolution");
    }
  }
  return bank;
}

std::vector<double> log_mel_spectrogram(const Spectrogram& spec,
                                        const MelFilterbank& bank) {
  if (bank.fft_bins != spec.bins) {
    throw ShapeError("log_mel_spectrogram: filterbank expects " +
                     std::to_string(bank.fft_bins) + " bins, spectrogram has " +
                     std::to_string(spec.bins));
  }
  std::vector<double> out(bank.n_mels * spec.frames);
  std::vector<double> power(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) power[k] = std::norm(spec.at(k, t));
    for (std::size_t m = 0; m < bank.n_mels; ++m) {
      double acc = 0.0;
      const double* w = bank.weights.data() + m * bank.fft_bins;
      for (std::size_t k = 0; k < spec.bins; ++k) acc += w[k] * power[k];
      out[m * spec.frames + t] = std::log(acc + kLogMelFloor);
    }
  }
  return out;
}

std::vector<MelSegment> log_mel(const AudioClip& clip,
                                const std::string& clip_id) {
  if (clip.samples.size() < kSegmentSamples) {
    throw ConfigError("log_mel: clip needs at least " +
                      std::to_string(kSegmentSamples) + " samples, got " +
                      std::to_string(clip.samples.size()));
  }
  const Spectrogram spec = stft(clip);
  static const MelFilterbank bank = mel_filterbank();
  const std::vector<double> lm = log_mel_spectrogram(spec, bank);
  const std::size_t n_segments = spec.frames / kSegmentFrames;
  std::vector<MelSegment> segments;
  segments.reserve(n_segments);
  for (std::size_t s = 0; s < n_segments; ++s) {
    std::vector<float> values(kMelBins * kSegmentFrames);
    for (std::size_t m = 0; m < kMelBins; ++m) {
      for (std::size_t t = 0; t < kSegmentFrames; ++t) {
        values[m * kSegmentFrames + t] = static_cast<float>(
            lm[m * spec.frames + s * kSegmentFrames + t]);
      }
    }
    segments.push_back(
        {Tensor({kMelBins, kSegmentFrames}, std::move(values)),
         {clip_id, s * kSegmentFrames}});
  }
  return segments;
}

double mean_power(const AudioClip& clip) {
  if (clip.samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : clip.samples) acc += static_cast<double>(s) * s;
  return acc / static_cast<double>(clip.samples.size());
}

MixResult mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                     double snr_db) {
  validate_clip(clean);
  validate_clip(noise);
  if (clean.samples.size() != noise.samples.size()) {
    throw ShapeError("mix_at_snr: clean has " +
                     std::to_string(clean.samples.size()) +
                     " samples but noise has " +
                     std::to_string(noise.samples.size()));
  }
  if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0)) {
    throw ConfigError("mix_at_snr: SNR must be a number above -inf");
  }
  const double p_clean = mean_power(clean);
  if (p_clean <= 0.0) throw NumericError("mix_at_snr: clean has zero power");
  MixResult result;
  if (snr_db >= kNoiselessSnrDb) {
    result.noise_scale = 0.0;
  } else {
    const double p_noise = mean_power(noise);
    if (p_noise <= 0.0) throw NumericError("mix_at_snr: noise has zero power");
    result.noise_scale =
        std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  }
  std::vector<double> mixed(clean.samples.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    mixed[i] = clean.samples[i] + result.noise_scale * noise.samples[i];
    peak = std::max(peak, std::fabs(mixed[i]));
  }
  if (peak > 1.0) result.normalization_scale = 1.0 / peak;
  result.mixture.sample_rate_hz = kSampleRate;
  result.mixture.samples.resize(mixed.size());
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    const double v = mixed[i] * result.normalization_scale;
    result.mixture.samples[i] =
        static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return result;
}

Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) {
    throw ConfigError("bilinear_resize: output extents must be positive");
  }
  if (img.height < 2 || img.width < 2) {
    throw ConfigError("bilinear_resize: input extents must be at least 2");
  }
  if (img.pixels.size() != img.height * img.width) {
    throw ShapeError("bilinear_resize: pixel buffer does not match extents");
  }
  auto source = [](std::size_t i, std::size_t in, std::size_t out) {
    double s = (static_cast<double>(i) + 0.5) *
                   (static_cast<double>(in) / static_cast<double>(out)) -
               0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  Image out{out_h, out_w, std::vector<float>(out_h * out_w)};
  for (std::size_t r = 0; r < out_h; ++r) {
    const double sy = source(r, img.height, out_h);
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = sy - static_cast<double>(y0);
    for (std::size_t c = 0; c < out_w; ++c) {
      const double sx = source(c, img.width, out_w);
      const std::size_t x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = sx - static_cast<double>(x0);
      const double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
      const double bottom = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
      out.pixels[r * out_w + c] =
          static_cast<float>((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

std::vector<VideoSegment> video_segments(const std::vector<Image>& frames,
                                         const std::string& clip_id) {
  const std::size_t count = frames.size() / kVideoFramesPerSegment;
  const std::size_t frame_size = kVideoSize * kVideoSize;
  std::vector<VideoSegment> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<float> pixels(kVideoFramesPerSegment * frame_size);
    for (std::size_t f = 0; f < kVideoFramesPerSegment; ++f) {
      const Image& src = frames[k * kVideoFramesPerSegment + f];
      const Image resized =
          (src.height == kVideoSize && src.width == kVideoSize)
              ? src
              : bilinear_resize(src, kVideoSize, kVideoSize);
      for (float v : resized.pixels) {
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw ConfigError("video frame values must lie in [0, 1]");
        }
      }
      std::copy(resized.pixels.begin(), resized.pixels.end(),
                pixels.begin() + f * frame_size);
    }
    VideoSegment seg;
    seg.frames = Tensor({kVideoFramesPerSegment, kVideoSize, kVideoSize},
                        std::move(pixels));
    seg.origin = {clip_id, k * kVideoFramesPerSegment};
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<SegmentTriple> make_segment_pairs(
    const AudioClip& clean, const AudioClip& noise,
    const std::vector<Image>& video_frames, double snr_db,
    const std::string& clip_id) {
  const MixResult mix = mix_at_snr(clean, noise, snr_db);
  std::vector<MelSegment> noisy_segments = log_mel(mix.mixture, clip_id);
  std::vector<MelSegment> clean_segments = log_mel(clean, clip_id);
  const std::size_t audio_segments = noisy_segments.size();
  const std::size_t video_count =
      video_frames.size() / kVideoFramesPerSegment;
  const std::size_t gap = audio_segments > video_count
                              ? audio_segments - video_count
                              : video_count - audio_segments;
  if (gap > 1) {
    throw ConfigError("make_segment_pairs: audio yields " +
                      std::to_string(audio_segments) +
                      " segments but video yields " +
                      std::to_string(video_count));
  }
  const std::size_t count = std::min(audio_segments, video_count);
  if (count == 0) {
    throw ConfigError("make_segment_pairs: need at least " +
                      std::to_string(kVideoFramesPerSegment) +
                      " video frames per audio segment");
  }
  std::vector<VideoSegment> video = video_segments(video_frames, clip_id);
  std::vector<SegmentTriple> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    SegmentTriple triple;
    triple.noisy = std::move(noisy_segments[k]);
    triple.clean = std::move(clean_segments[k]);
    triple.video = std::move(video[k]);
    triple.snr_db = snr_db;
    out.push_back(std::move(triple));
  }
  return out;
}

}  // namespace mffcn
