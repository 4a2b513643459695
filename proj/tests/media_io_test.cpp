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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "mffcn/checkpoint.hpp"
#include "mffcn/errors.hpp"
#include "mffcn/media_io.hpp"
#include "mffcn/mten.hpp"
#include "mffcn/training.hpp"
#include "mffcn/synth.hpp"

namespace mffcn {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mffcn_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Wav, RoundTripOnSixteenBitGrid) {
  AudioClip c;
  for (int v : {0, 1, -1, 32767, -32768, 1234, -20000}) {
    c.samples.push_back(static_cast<float>(v) / 32768.0f);
  }
  std::stringstream ss;
  write_wav(ss, c);
  EXPECT_EQ(ss.str().size(), 44u + 2 * c.samples.size());
  const AudioClip back = read_wav(ss);
  EXPECT_EQ(back.sample_rate_hz, kSampleRate);
  EXPECT_EQ(back.samples, c.samples);
}

TEST(Wav, QuantizationErrorAndClipping) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-0.99f, 0.99f);
  AudioClip c;
  for (int i = 0; i < 500; ++i) c.samples.push_back(u(rng));
  c.samples.push_back(1.0f);
  std::stringstream ss;
  write_wav(ss, c);
  const AudioClip back = read_wav(ss);
  for (std::size_t i = 0; i < 500; ++i) {
    EXPECT_LE(std::fabs(back.samples[i] - c.samples[i]), 0.5f / 32768.0f + 1e-7f);
  }
  EXPECT_FLOAT_EQ(back.samples.back(), 32767.0f / 32768.0f);
  c.samples.back() = 1.5f;
  std::stringstream rejected;
  EXPECT_THROW(write_wav(rejected, c), ConfigError);
}

std::string wav_header(std::uint16_t format, std::uint16_t channels,
                       std::uint32_t rate, std::uint16_t bits) {
  std::string h = "RIFF";
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) h.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto put16 = [&](std::uint16_t v) {
    h.push_back(static_cast<char>(v & 0xff));
    h.push_back(static_cast<char>(v >> 8));
  };
  put32(40);
  h += "WAVEfmt ";
  put32(16);
  put16(format);
  put16(channels);
  put32(rate);
  put32(rate * channels * bits / 8);
  put16(static_cast<std::uint16_t>(channels * bits / 8));
  put16(bits);
  h += "data";
  put32(4);
  h += std::string(4, '\0');
  return h;
}

TEST(Wav, RejectsUnsupportedLayouts) {
  auto read = [](const std::string& bytes) {
    std::istringstream in(bytes);
    return read_wav(in);
  };
  EXPECT_NO_THROW(read(wav_header(1, 1, 16000, 16)));
  EXPECT_THROW(read(wav_header(3, 1, 16000, 32)), FormatError);
  EXPECT_THROW(read(wav_header(1, 2, 16000, 16)), FormatError);
  EXPECT_THROW(read(wav_header(1, 1, 44100, 16)), FormatError);
  EXPECT_THROW(read(wav_header(1, 1, 16000, 8)), FormatError);
  EXPECT_THROW(read("RIFX"), FormatError);
  EXPECT_THROW(read(wav_header(1, 1, 16000, 16).substr(0, 30)), FormatError);
  EXPECT_THROW(read_wav(fs::path("/nonexistent/x.wav")), FormatError);
}

TEST(Pgm, RoundTripOnByteGrid) {
  Image img{3, 4, {}};
  for (int i = 0; i < 12; ++i) img.pixels.push_back(static_cast<float>(i * 20) / 255.0f);
  std::stringstream ss;
  write_pgm(ss, img);
  const Image back = read_pgm(ss);
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.width, 4u);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Pgm, HeaderCommentsAndRejections) {
  std::string bytes = "P5\n# comment\n2 1\n255\n";
  bytes += std::string{'\x00', '\xff'};
  std::istringstream in(bytes);
  const Image img = read_pgm(in);
  EXPECT_EQ(img.pixels, (std::vector<float>{0.0f, 1.0f}));
  auto read = [](const std::string& b) {
    std::istringstream s(b);
    return read_pgm(s);
  };
  EXPECT_THROW(read("P2\n1 1\n255\n0"), FormatError);
  EXPECT_THROW(read("P5\n1 1\n65535\n00"), FormatError);
  EXPECT_THROW(read("P5\n0 1\n255\n"), FormatError);
  EXPECT_THROW(read("P5\n2 2\n255\nab"), FormatError);
  Image bad{2, 2, {0.0f}};
  std::ostringstream out;
  EXPECT_THROW(write_pgm(out, bad), ShapeError);
}

TEST(FrameDirectory, RoundTripPreservesOrder) {
  const fs::path dir = scratch_dir("frames");
  std::vector<Image> frames;
  for (int t = 0; t < 3; ++t) {
    frames.push_back(Image{2, 2, std::vector<float>(4, static_cast<float>(t * 50) / 255.0f)});
  }
  write_frame_directory(dir, frames);
  const std::vector<Image> back = read_frame_directory(dir);
  ASSERT_EQ(back.size(), 3u);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(back[t].pixels, frames[t].pixels);
  fs::remove(dir / "frame_000001.pgm");
  EXPECT_THROW(read_frame_directory(dir), FormatError);
  EXPECT_THROW(read_frame_directory(dir / "missing"), FormatError);
}

TEST(Mten, RoundTripIsBitExact) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0.0f, 3.0f);
  std::vector<float> v(2 * 3 * 5);
  for (float& x : v) x = n(rng);
  v[0] = -0.0f;
  v[1] = 1e-42f;  // subnormal
  const Tensor t({2, 3, 5}, v);
  std::stringstream ss;
  write_mten(ss, t);
  EXPECT_EQ(ss.str().size(), 4u + 1 + 1 + 3 * 4 + v.size() * 4);
  const Tensor back = read_mten(ss);
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), v.size() * 4), 0);
}

TEST(Mten, Rejections) {
  auto read = [](const std::string& b) {
    std::istringstream s(b);
    return read_mten(s);
  };
  std::stringstream ok;
  write_mten(ok, Tensor::filled({2}, 1.0f));
  const std::string good = ok.str();
  EXPECT_NO_THROW(read(good));
  EXPECT_THROW(read("MTEX" + good.substr(4)), FormatError);
  std::string ver = good;
  ver[4] = 2;
  EXPECT_THROW(read(ver), FormatError);
  std::string rank0 = good;
  rank0[5] = 0;
  EXPECT_THROW(read(rank0), FormatError);
  EXPECT_THROW(read(good.substr(0, good.size() - 1)), FormatError);
  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + nan.size() - 4, &q, 4);
  EXPECT_THROW(read(nan), FormatError);
}

TEST(SpectrogramImage, NormalizesAndPutsLowRowsAtBottom) {
  const Tensor t({2, 2}, {0.0f, 1.0f, 2.0f, 4.0f});
  const Image img = spectrogram_image(t);
  EXPECT_EQ(img.pixels, (std::vector<float>{0.5f, 1.0f, 0.0f, 0.25f}));
  for (float p : spectrogram_image(Tensor::filled({3, 3}, 7.0f)).pixels) {
    EXPECT_EQ(p, 0.0f);
  }
  EXPECT_THROW(spectrogram_image(Tensor::zeros({1, 2, 2})), ShapeError);
}

TEST(FramesFromTensor, SplitsLeadingAxis) {
  const Tensor t({2, 1, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  const auto frames = frames_from_tensor(t);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[1].pixels, (std::vector<float>{3.0f, 4.0f}));
  EXPECT_THROW(frames_from_tensor(Tensor::zeros({4})), ShapeError);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const MffcnModel<float> model({FusionStrategy::kMultiLayer, 16}, 3);
  std::stringstream ss;
  write_checkpoint(ss, model);
  const MffcnModel<float> back = read_checkpoint(ss);
  EXPECT_TRUE(identical_models(model, back));
  EXPECT_FALSE(identical_models(model, MffcnModel<float>({FusionStrategy::kMultiLayer, 16}, 4)));
  std::string bytes = ss.str();
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  EXPECT_THROW(read_checkpoint(bad), FormatError);
}

TEST(Triples, SaveLoadRoundTrip) {
  const auto items = synth_dataset(5, 3);
  const fs::path dir = scratch_dir("triples");
  save_triples(dir, items);
  const auto back = load_triples(dir);
  ASSERT_EQ(back.size(), items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_TRUE(std::equal(items[i].noisy.values.data().begin(),
                           items[i].noisy.values.data().end(),
                           back[i].noisy.values.data().begin()));
    EXPECT_TRUE(std::equal(items[i].video.frames.data().begin(),
                           items[i].video.frames.data().end(),
                           back[i].video.frames.data().begin()));
    EXPECT_TRUE(std::equal(items[i].clean.values.data().begin(),
                           items[i].clean.values.data().end(),
                           back[i].clean.values.data().begin()));
  }
}

}  // namespace
}  // namespace mffcn
