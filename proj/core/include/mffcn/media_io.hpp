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

#ifndef MFFCN_MEDIA_IO_HPP_
#define MFFCN_MEDIA_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mffcn/dsp.hpp"
#include "mffcn/tensor.hpp"

namespace mffcn {

// RIFF/WAVE, mono, 16-bit signed little-endian PCM at 16000 Hz only. Any
// other layout is rejected with a FormatError naming the offending field.
AudioClip read_wav(std::istream& in);
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(std::ostream& out, const AudioClip& clip);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Binary PGM (P5, maxval 255). Pixel values map to [0, 1].
Image read_pgm(std::istream& in);
Image read_pgm(const std::filesystem::path& path);
void write_pgm(std::ostream& out, const Image& img);
void write_pgm(const std::filesystem::path& path, const Image& img);

// Reads frame_000000.pgm, frame_000001.pgm, ... from `dir` (25 fps). The
// sequence starts at the lowest index present and must be contiguous.
std::vector<Image> read_frame_directory(const std::filesystem::path& dir);
void write_frame_directory(const std::filesystem::path& dir,
                           const std::vector<Image>& frames);

// Frames from an MTEN tensor of shape [T, H, W].
std::vector<Image> frames_from_tensor(const Tensor& video);

// Min-max scales a [H, W] tensor into an 8-bit image. Row 0 of the image is
// the last row of the tensor so that low mel bins end up at the bottom.
Image spectrogram_image(const Tensor& values);
// Comma-separated rows, one line per tensor row of a [H, W] tensor.
void write_csv(const std::filesystem::path& path, const Tensor& values);

}  // namespace mffcn

#endif  // MFFCN_MEDIA_IO_HPP_
