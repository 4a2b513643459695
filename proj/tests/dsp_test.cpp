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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mffcn/dsp.hpp"
#include "mffcn/errors.hpp"
#include "mffcn/fft.hpp"

namespace mffcn {
namespace {

AudioClip random_clip(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  AudioClip c;
  c.samples.resize(n);
  for (float& s : c.samples) s = static_cast<float>(u(rng));
  return c;
}

AudioClip sinusoid(std::size_t n, double hz, double amp = 0.5) {
  AudioClip c;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples[i] = static_cast<float>(
        amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) /
                       kSampleRate));
  }
  return c;
}

TEST(HannWindow, SymmetricDefinition) {
  const std::vector<double> w = hann_window(640);
  ASSERT_EQ(w.size(), 640u);
  for (std::size_t n = 0; n < 640; ++n) {
    EXPECT_NEAR(w[n], 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / 639.0)),
                1e-15);
    EXPECT_NEAR(w[n], w[639 - n], 1e-15);
  }
}

TEST(RealFft, MatchesDirectDft) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> x(12);
  for (double& v : x) v = u(rng);
  RealFft fft(12);
  std::vector<std::complex<double>> X(fft.bins());
  fft.forward(x, X);
  for (std::size_t k = 0; k < fft.bins(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < 12; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / 12.0);
    }
    EXPECT_NEAR(std::abs(X[k] - acc), 0.0, 1e-12);
  }
  std::vector<double> back(12);
  fft.inverse(X, back);
  for (std::size_t t = 0; t < 12; ++t) EXPECT_NEAR(back[t], x[t], 1e-12);
}

TEST(Stft, FrameCountArithmetic) {
  EXPECT_EQ(stft(random_clip(3680, 1)).frames, 20u);
  EXPECT_EQ(stft(random_clip(3680, 1)).bins, 321u);
  EXPECT_EQ(stft(random_clip(3679, 1)).frames, 19u);
  EXPECT_EQ(stft(random_clip(7360, 1)).frames, 43u);
  EXPECT_EQ(stft(random_clip(640, 1)).frames, 1u);
}

TEST(Stft, SilenceGivesZeroSpectrum) {
  AudioClip z;
  z.samples.assign(3680, 0.0f);
  for (const auto& v : stft(z).values) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(Stft, ParsevalWithinOnePercent) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AudioClip c = random_clip(3680, seed);
    const Spectrogram s = stft(c);
    const std::vector<double> w = hann_window(kWindowLength);
    for (std::size_t f = 0; f < s.frames; f += 7) {
      double time = 0.0;
      for (std::size_t i = 0; i < kWindowLength; ++i) {
        const double v = w[i] * c.samples[f * kHopLength + i];
        time += v * v;
      }
      EXPECT_NEAR(spectral_frame_energy(s, f, kWindowLength) / time, 1.0, 0.01);
    }
  }
}

// A bin-centred sinusoid puts its energy in its own bin and the two
// neighbours the Hann main lobe spans.
TEST(Stft, BinCentredSinusoidPeaksInItsBin) {
  for (std::size_t k : {5u, 40u, 100u, 250u}) {
    const double hz = static_cast<double>(kSampleRate) / kWindowLength * k;
    const Spectrogram s = stft(sinusoid(kWindowLength, hz));
    double total = 0.0, lobe = 0.0;
    std::size_t peak = 0;
    for (std::size_t b = 0; b < s.bins; ++b) {
      const double e = std::norm(s.at(b, 0));
      total += e;
      if (b + 1 >= k && b <= k + 1) lobe += e;
      if (e > std::norm(s.at(peak, 0))) peak = b;
    }
    EXPECT_EQ(peak, k);
    EXPECT_GE(lobe / total, 0.99);
  }
}

TEST(MelFilterbank, ShapeMonotoneCentresUnimodalRows) {
  const MelFilterbank bank = mel_filterbank();
  EXPECT_EQ(bank.n_mels, 80u);
  EXPECT_EQ(bank.fft_bins, 321u);
  ASSERT_EQ(bank.weights.size(), 80u * 321u);
  for (std::size_t m = 1; m < 80; ++m) {
    EXPECT_GT(bank.center_hz[m], bank.center_hz[m - 1]);
  }
  for (std::size_t m = 0; m < 80; ++m) {
    double row = 0.0;
    std::size_t peak = 0;
    for (std::size_t b = 0; b < 321; ++b) {
      row += bank.weight(m, b);
      if (bank.weight(m, b) > bank.weight(m, peak)) peak = b;
    }
    EXPECT_GT(row, 0.0) << "mel " << m;
    for (std::size_t b = 1; b <= peak; ++b) {
      EXPECT_GE(bank.weight(m, b), bank.weight(m, b - 1));
    }
    for (std::size_t b = peak + 1; b < 321; ++b) {
      EXPECT_LE(bank.weight(m, b), bank.weight(m, b - 1));
    }
  }
}

TEST(MelScale, HtkRoundTrip) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  for (double hz : {0.0, 100.0, 1000.0, 8000.0}) {
    EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
  }
}

TEST(LogMel, SilenceEqualsFloor) {
  AudioClip z;
  z.samples.assign(kSegmentSamples, 0.0f);
  const auto segs = log_mel(z);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].values.shape(), (Shape{80, 20}));
  for (float v : segs[0].values.data()) {
    EXPECT_FLOAT_EQ(v, static_cast<float>(std::log(kLogMelFloor)));
  }
}

TEST(LogMel, SegmentCountDropsRemainder) {
  EXPECT_EQ(log_mel(random_clip(3680, 2)).size(), 1u);
  EXPECT_THROW(log_mel(random_clip(3679, 2)), ConfigError);
  EXPECT_EQ(log_mel(random_clip(7360, 2)).size(), 2u);
  const auto segs = log_mel(random_clip(7360, 2), "c");
  EXPECT_EQ(segs[1].origin.frame_offset, 20u);
  EXPECT_EQ(segs[1].origin.clip_id, "c");
}

TEST(LogMel, ScalingByTenAddsTwoLnTen) {
  AudioClip c = random_clip(kSegmentSamples, 3, 0.05);
  AudioClip loud = c;
  for (float& s : loud.samples) s *= 10.0f;
  const Tensor a = log_mel(c)[0].values, b = log_mel(loud)[0].values;
  const double want = 2.0 * std::log(10.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] > std::log(kLogMelFloor) + 10.0) {
      EXPECT_NEAR(b.data()[i] - a.data()[i], want, 1e-3);
    }
  }
}

TEST(LogMel, Deterministic) {
  const AudioClip c = random_clip(7360, 4);
  const auto a = log_mel(c), b = log_mel(c);
  for (std::size_t s = 0; s < a.size(); ++s) {
    EXPECT_TRUE(std::equal(a[s].values.data().begin(), a[s].values.data().end(),
                           b[s].values.data().begin()));
  }
}

double achieved_snr(const AudioClip& clean, const MixResult& m) {
  double pc = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const double n = m.mixture.samples[i] / m.normalization_scale -
                     static_cast<double>(clean.samples[i]);
    pc += static_cast<double>(clean.samples[i]) * clean.samples[i];
    pn += n * n;
  }
  return 10.0 * std::log10(pc / pn);
}

TEST(MixAtSnr, EqualPowerAtZeroDbKeepsNoiseScale) {
  AudioClip clean = random_clip(4000, 5, 0.2);
  AudioClip noise = clean;
  std::reverse(noise.samples.begin(), noise.samples.end());
  EXPECT_NEAR(mix_at_snr(clean, noise, 0.0).noise_scale, 1.0, 1e-12);
}

TEST(MixAtSnr, PlusTenDbNoisePower) {
  AudioClip clean = random_clip(4000, 6, 0.2), noise = random_clip(4000, 7, 0.3);
  const MixResult m = mix_at_snr(clean, noise, 10.0);
  const double p_noise = mean_power(noise) * m.noise_scale * m.noise_scale;
  EXPECT_NEAR(p_noise, mean_power(clean) / 10.0, 1e-12);
}

TEST(MixAtSnr, AchievesRequestedSnrWithinHundredthDb) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> snr(-10.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const AudioClip clean = random_clip(8000, 100 + trial, 0.3);
    const AudioClip noise = random_clip(8000, 200 + trial, 0.9);
    const double target = snr(rng);
    const MixResult m = mix_at_snr(clean, noise, target);
    EXPECT_NEAR(achieved_snr(clean, m), target, 0.01);
    for (float s : m.mixture.samples) EXPECT_LE(std::fabs(s), 1.0f);
  }
}

TEST(MixAtSnr, NoiselessLimitAndErrors) {
  const AudioClip clean = random_clip(1000, 9, 0.2);
  const AudioClip noise = random_clip(1000, 10, 0.2);
  const MixResult m = mix_at_snr(clean, noise, 120.0);
  EXPECT_EQ(m.noise_scale, 0.0);
  EXPECT_EQ(m.mixture.samples, clean.samples);
  EXPECT_THROW(mix_at_snr(clean, random_clip(999, 1), 0.0), ShapeError);
  AudioClip silent;
  silent.samples.assign(1000, 0.0f);
  EXPECT_THROW(mix_at_snr(silent, noise, 0.0), NumericError);
}

Image ramp_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img{h, w, std::vector<float>(h * w)};
  for (float& p : img.pixels) p = u(rng);
  return img;
}

// Scalar half-pixel-centre bilinear sample.
double bilinear_oracle(const Image& img, double y, double x) {
  auto clampd = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
  y = clampd(y, static_cast<double>(img.height - 1));
  x = clampd(x, static_cast<double>(img.width - 1));
  const double fy = std::floor(y), fx = std::floor(x);
  const std::size_t y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const double dy = y - fy, dx = x - fx;
  return img.at(y0, x0) * (1 - dy) * (1 - dx) + img.at(y0, x1) * (1 - dy) * dx +
         img.at(y1, x0) * dy * (1 - dx) + img.at(y1, x1) * dy * dx;
}

TEST(BilinearResize, MatchesScalarOracle) {
  const Image img = ramp_image(128, 128, 11);
  const Image out = bilinear_resize(img, 80, 80);
  for (std::size_t r = 0; r < 80; ++r)
    for (std::size_t c = 0; c < 80; ++c) {
      const double y = (r + 0.5) * 128.0 / 80.0 - 0.5;
      const double x = (c + 0.5) * 128.0 / 80.0 - 0.5;
      EXPECT_NEAR(out.at(r, c), bilinear_oracle(img, y, x), 1e-6);
    }
}

TEST(BilinearResize, IdentityConstantAndMonotone) {
  const Image img = ramp_image(9, 7, 12);
  EXPECT_EQ(bilinear_resize(img, 9, 7).pixels, img.pixels);
  Image flat{6, 6, std::vector<float>(36, 0.375f)};
  for (float p : bilinear_resize(flat, 13, 4).pixels) EXPECT_FLOAT_EQ(p, 0.375f);
  Image ramp{5, 8, std::vector<float>(40)};
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) ramp.pixels[r * 8 + c] = c / 7.0f;
  const Image up = bilinear_resize(ramp, 11, 29);
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t c = 1; c < 29; ++c) EXPECT_GE(up.at(r, c), up.at(r, c - 1));
  EXPECT_THROW(bilinear_resize(ramp, 0, 3), ConfigError);
}

std::vector<Image> frames(std::size_t n, std::size_t size = 96) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ramp_image(size, size, 50 + i));
  return out;
}

TEST(SegmentPairs, OneSecondGivesFourAlignedTriples) {
  const AudioClip clean = random_clip(16000, 13, 0.3);
  const AudioClip noise = random_clip(16000, 14, 0.3);
  const auto triples = make_segment_pairs(clean, noise, frames(25), 0.0, "clip");
  ASSERT_EQ(triples.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    const SegmentTriple& t = triples[k];
    EXPECT_EQ(t.noisy.values.shape(), (Shape{80, 20}));
    EXPECT_EQ(t.clean.values.shape(), (Shape{80, 20}));
    EXPECT_EQ(t.video.frames.shape(), (Shape{5, 80, 80}));
    // 20 hops of 10 ms = 5 frames at 25 fps = 200 ms.
    EXPECT_EQ(t.noisy.origin.frame_offset, 20 * k);
    EXPECT_EQ(t.video.origin.frame_offset, 5 * k);
    EXPECT_DOUBLE_EQ(t.noisy.origin.frame_offset * 0.010,
                     t.video.origin.frame_offset / kVideoFps);
  }
}

TEST(SegmentPairs, NoiselessMixtureEqualsClean) {
  const AudioClip clean = random_clip(kSegmentSamples, 15, 0.3);
  const auto t = make_segment_pairs(clean, random_clip(kSegmentSamples, 16),
                                    frames(5), kNoiselessSnrDb);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_TRUE(std::equal(t[0].noisy.values.data().begin(),
                         t[0].noisy.values.data().end(),
                         t[0].clean.values.data().begin()));
}

TEST(VideoSegments, ResizesAndValidatesRange) {
  const auto segs = video_segments(frames(11, 128));
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[1].origin.frame_offset, 5u);
  std::vector<Image> bad = frames(5, 80);
  bad[2].pixels[7] = 1.5f;
  EXPECT_THROW(video_segments(bad), ConfigError);
}

TEST(ValidateClip, RejectsBadClips) {
  AudioClip c = random_clip(10, 1);
  c.sample_rate_hz = 8000;
  EXPECT_THROW(validate_clip(c), ConfigError);
  AudioClip e;
  EXPECT_THROW(validate_clip(e), ConfigError);
  AudioClip n = random_clip(10, 1);
  n.samples[3] = NAN;
  EXPECT_THROW(validate_clip(n), ConfigError);
}

}  // namespace
}  // namespace mffcn
