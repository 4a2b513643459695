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

#include "mffcn/media_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>

#include "mffcn/errors.hpp"

namespace mffcn {

namespace {

std::uint32_t le32(const unsigned char* b) {
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint16_t le16(const unsigned char* b) {
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void put32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void read_exact(std::istream& in, unsigned char* dst, std::size_t n,
                const char* what) {
  if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n))) {
    throw FormatError(std::string("WAV: truncated ") + what);
  }
}

}  // namespace

AudioClip read_wav(std::istream& in) {
  unsigned char riff[12];
  read_exact(in, riff, 12, "RIFF header");
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4)) {
    throw FormatError("WAV: not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (true) {
    unsigned char hdr[8];
    read_exact(in, hdr, 8, "chunk header");
    const std::uint32_t size = le32(hdr + 4);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("WAV: fmt chunk too small");
      std::vector<unsigned char> fmt(size + (size & 1));
      read_exact(in, fmt.data(), fmt.size(), "fmt chunk");
      format = le16(fmt.data());
      channels = le16(fmt.data() + 2);
      rate = le32(fmt.data() + 4);
      bits = le16(fmt.data() + 14);
      if (format == 0xFFFE && size >= 26) format = le16(fmt.data() + 24);
      have_fmt = true;
      if (format != 1) {
        throw FormatError("WAV: only PCM (format 1) is supported, got format " +
                          std::to_string(format));
      }
      if (channels != 1) {
        throw FormatError("WAV: only mono is supported, got " +
                          std::to_string(channels) + " channels");
      }
      if (bits != 16) {
        throw FormatError("WAV: only 16-bit samples are supported, got " +
                          std::to_string(bits) + " bits");
      }
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw FormatError("WAV: sample rate must be 16000 Hz, got " +
                          std::to_string(rate));
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("WAV: data chunk before fmt chunk");
      if (size % 2 != 0) throw FormatError("WAV: odd data chunk size");
      std::vector<unsigned char> raw(size);
      read_exact(in, raw.data(), raw.size(), "data chunk");
      AudioClip clip;
      clip.sample_rate_hz = kSampleRate;
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(le16(raw.data() + 2 * i));
        clip.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      if (clip.samples.empty()) throw FormatError("WAV: no samples");
      return clip;
    } else {
      in.ignore(static_cast<std::streamsize>(size + (size & 1)));
      if (!in) throw FormatError("WAV: truncated chunk");
    }
  }
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_wav(in);
}

void write_wav(std::ostream& out, const AudioClip& clip) {
  validate_clip(clip);
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (float s : clip.samples) {
    const double scaled = std::round(static_cast<double>(s) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0,
                                                        32767.0));
    put16(out, static_cast<std::uint16_t>(v));
  }
  if (!out) throw FormatError("WAV: write failed");
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_wav(out, clip);
}

namespace {

// Next whitespace-delimited PGM header token, skipping # comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw FormatError("PGM: truncated header");
  return tok;
}

std::size_t pgm_number(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  if (tok.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(std::string("PGM: bad ") + what + " '" + tok + "'");
  }
  return std::stoul(tok);
}

}  // namespace

Image read_pgm(std::istream& in) {
  if (pgm_token(in) != "P5") throw FormatError("PGM: expected binary P5");
  const std::size_t width = pgm_number(in, "width");
  const std::size_t height = pgm_number(in, "height");
  const std::size_t maxval = pgm_number(in, "maxval");
  if (width == 0 || height == 0) throw FormatError("PGM: zero extent");
  if (maxval != 255) {
    throw FormatError("PGM: maxval must be 255, got " + std::to_string(maxval));
  }
  std::vector<unsigned char> raw(width * height);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("PGM: truncated pixel data");
  }
  Image img{height, width, std::vector<float>(raw.size())};
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0f;
  return img;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_pgm(in);
}

void write_pgm(std::ostream& out, const Image& img) {
  if (img.pixels.size() != img.height * img.width || img.pixels.empty()) {
    throw ShapeError("write_pgm: pixel buffer does not match extents");
  }
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (float v : img.pixels) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255))));
  }
  if (!out) throw FormatError("PGM: write failed");
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_pgm(out, img);
}

std::vector<Image> read_frame_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError("frame directory " + dir.string() + " does not exist");
  }
  static const std::regex pattern(R"(frame_(\d{6})\.pgm)");
  std::map<std::size_t, std::filesystem::path> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      found[std::stoul(m[1].str())] = entry.path();
    }
  }
  if (found.empty()) {
    throw FormatError("no frame_%06d.pgm files in " + dir.string());
  }
  std::vector<Image> frames;
  std::size_t expected = found.begin()->first;
  for (const auto& [index, path] : found) {
    if (index != expected) {
      throw FormatError("frame sequence in " + dir.string() +
                        " has a gap at index " + std::to_string(expected));
    }
    frames.push_back(read_pgm(path));
    ++expected;
  }
  return frames;
}

void write_frame_directory(const std::filesystem::path& dir,
                           const std::vector<Image>& frames) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
    write_pgm(dir / name, frames[i]);
  }
}

std::vector<Image> frames_from_tensor(const Tensor& video) {
  if (video.rank() != 3) {
    throw ShapeError("video tensor must be [T,H,W], got " +
                     shape_string(video.shape()));
  }
  const std::size_t h = video.dim(1), w = video.dim(2);
  std::vector<Image> frames;
  for (std::size_t t = 0; t < video.dim(0); ++t) {
    auto first = video.data().begin() + static_cast<std::ptrdiff_t>(t * h * w);
    frames.push_back(
        Image{h, w, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(h * w))});
  }
  return frames;
}

Image spectrogram_image(const Tensor& values) {
  if (values.rank() != 2) {
    throw ShapeError("spectrogram_image: expected [H,W], got " +
                     shape_string(values.shape()));
  }
  const std::size_t h = values.dim(0), w = values.dim(1);
  const auto [lo_it, hi_it] =
      std::minmax_element(values.data().begin(), values.data().end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  Image img{h, w, std::vector<float>(h * w)};
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = values.at((h - 1 - r) * w + c);
      img.pixels[r * w + c] =
          span > 0 ? static_cast<float>((v - lo) / span) : 0.0f;
    }
  }
  return img;
}

void write_csv(const std::filesystem::path& path, const Tensor& values) {
  if (values.rank() != 2) {
    throw ShapeError("write_csv: expected [H,W], got " +
                     shape_string(values.shape()));
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << std::setprecision(9);
  const std::size_t h = values.dim(0), w = values.dim(1);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (c) out << ',';
      out << values.at(r * w + c);
    }
    out << '\n';
  }
}

}  // namespace mffcn
