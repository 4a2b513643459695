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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mffcn/checkpoint.hpp"
#include "mffcn/dsp.hpp"
#include "mffcn/media_io.hpp"
#include "mffcn/mten.hpp"
#include "mffcn/synth.hpp"
#include "mffcn/training.hpp"

namespace mffcn {
namespace {

namespace fs = std::filesystem;

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "mffcn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mffcn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A clip directory with noisy.wav, clean.wav and frames/ of ten segments.
fs::path make_clip_dir(const std::string& name) {
  const fs::path dir = scratch(name);
  const SynthClip s = synth_clip(21, 10);
  write_wav(dir / "clean.wav", s.clean);
  write_wav(dir / "noisy.wav", mix_at_snr(s.clean, s.noise, 0.0).mixture);
  write_frame_directory(dir / "frames", s.frames);
  return dir;
}

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}), cli::kExitOk);
  for (const char* sub : {"gradcheck", "trace-shapes", "train", "enhance", "eval",
                          "ablate", "export-spec"}) {
    EXPECT_EQ(run({sub, "--help"}), cli::kExitOk) << sub;
  }
}

TEST(Cli, BadArgumentsAreInputErrors) {
  EXPECT_EQ(run({}), cli::kExitBadInput);
  EXPECT_EQ(run({"frobnicate"}), cli::kExitBadInput);
  EXPECT_EQ(run({"trace-shapes", "--bogus"}), cli::kExitBadInput);
  EXPECT_EQ(run({"trace-shapes", "--width-divisor", "3"}), cli::kExitBadInput);
  EXPECT_EQ(run({"train", "--strategy", "nope", "--out", scratch("bad").string()}),
            cli::kExitBadInput);
  EXPECT_EQ(run({"train", "--lr", "-1", "--out", scratch("bad").string()}),
            cli::kExitBadInput);
  EXPECT_EQ(run({"gradcheck", "--tolerance", "-1"}), cli::kExitBadInput);
  EXPECT_EQ(run({"enhance", "--checkpoint", "/nonexistent.mffc", "--data",
                 "/nonexistent", "--out", scratch("bad").string()}),
            cli::kExitBadInput);
  const fs::path junk = scratch("junk") / "x.mten";
  std::ofstream(junk) << "garbage";
  EXPECT_EQ(run({"export-spec", "--data", junk.string(), "--out",
                 scratch("junk_out").string()}),
            cli::kExitBadInput);
}

TEST(Cli, TraceShapesSucceeds) {
  EXPECT_EQ(run({"trace-shapes", "--width-divisor", "16"}), cli::kExitOk);
}

TEST(Cli, GradcheckWithZeroToleranceFailsTheGate) {
  EXPECT_EQ(run({"gradcheck", "--tolerance", "0", "--width-divisor", "64"}),
            cli::kExitGateFailed);
}

TEST(Cli, ZeroStepTrainWritesInitialisedCheckpoint) {
  const fs::path out = scratch("train0");
  ASSERT_EQ(run({"train", "--steps", "0", "--width-divisor", "64", "--seed", "5",
                 "--strategy", "late", "--items", "2", "--out", out.string()}),
            cli::kExitOk);
  const MffcnModel<float> m = load_checkpoint(out / "model.mffc");
  EXPECT_TRUE(identical_models(m, MffcnModel<float>({FusionStrategy::kLateFusion, 64}, 5)));
}

TEST(Cli, TrainingIsBitReproducible) {
  const std::vector<std::string> args = {"train", "--steps", "3", "--width-divisor", "64",
                                         "--batch", "2", "--items", "3"};
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  auto with_out = [&](const fs::path& out) {
    auto v = args;
    v.push_back("--out");
    v.push_back(out.string());
    return v;
  };
  ASSERT_EQ(run(with_out(a)), cli::kExitOk);
  ASSERT_EQ(run(with_out(b)), cli::kExitOk);
  EXPECT_EQ(slurp(a / "model.mffc"), slurp(b / "model.mffc"));
  EXPECT_EQ(slurp(a / "loss.csv"), slurp(b / "loss.csv"));
  EXPECT_FALSE(slurp(a / "loss.csv").empty());
}

TEST(Cli, TrainFromTripleDirectory) {
  const fs::path data = scratch("triples");
  save_triples(data, synth_dataset(4, 2));
  const fs::path out = scratch("train_data");
  EXPECT_EQ(run({"train", "--steps", "1", "--width-divisor", "64", "--batch", "2",
                 "--data", data.string(), "--out", out.string()}),
            cli::kExitOk);
  EXPECT_TRUE(fs::exists(out / "model.mffc"));
}

TEST(Cli, EnhanceEvalAndExportPipeline) {
  const fs::path model_dir = scratch("pipeline_model");
  ASSERT_EQ(run({"train", "--steps", "0", "--width-divisor", "64", "--items", "1",
                 "--out", model_dir.string()}),
            cli::kExitOk);
  const std::string ckpt = (model_dir / "model.mffc").string();
  const fs::path clip = make_clip_dir("pipeline_clip");

  const fs::path enh = scratch("pipeline_enhance");
  ASSERT_EQ(run({"enhance", "--checkpoint", ckpt, "--data", clip.string(), "--out",
                 enh.string()}),
            cli::kExitOk);
  const Tensor enhanced = load_mten(enh / "enhanced.mten");
  EXPECT_EQ(enhanced.shape(), (Shape{10, 80, 20}));
  for (const char* f : {"noisy.mten", "clean.mten", "enhanced.wav",
                        "segment_000_noisy.pgm", "segment_001_enhanced.pgm",
                        "segment_001_clean.pgm"}) {
    EXPECT_TRUE(fs::exists(enh / f)) << f;
  }
  EXPECT_EQ(read_wav(enh / "enhanced.wav").samples.size(), synth_samples(10));

  const fs::path spec = scratch("pipeline_spec");
  ASSERT_EQ(run({"export-spec", "--data", (enh / "enhanced.mten").string(), "--out",
                 spec.string()}),
            cli::kExitOk);
  EXPECT_EQ(read_pgm(spec / "enhanced_001.pgm").height, 80u);
  EXPECT_TRUE(fs::exists(spec / "enhanced_000.csv"));

  const fs::path back = spec / "roundtrip.mten";
  ASSERT_EQ(run({"export-spec", "--data", (spec / "enhanced_000.pgm").string(), "--out",
                 back.string()}),
            cli::kExitOk);
  EXPECT_EQ(load_mten(back).shape(), (Shape{80, 20}));
  const fs::path frames = spec / "frames.mten";
  ASSERT_EQ(run({"export-spec", "--data", (clip / "frames").string(), "--out",
                 frames.string()}),
            cli::kExitOk);
  EXPECT_EQ(load_mten(frames).shape(), (Shape{50, 96, 96}));

  const fs::path ev = scratch("pipeline_eval");
  ASSERT_EQ(run({"eval", "--checkpoint", ckpt, "--data", clip.string(), "--out",
                 ev.string()}),
            cli::kExitOk);
  const std::string report = slurp(ev / "report.csv");
  EXPECT_NE(report.find("stoi_percent"), std::string::npos);
}

}  // namespace
}  // namespace mffcn
