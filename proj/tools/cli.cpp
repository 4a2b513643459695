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

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mffcn/checkpoint.hpp"
#include "mffcn/dsp.hpp"
#include "mffcn/errors.hpp"
#include "mffcn/eval.hpp"
#include "mffcn/gradcheck_suite.hpp"
#include "mffcn/media_io.hpp"
#include "mffcn/model.hpp"
#include "mffcn/mten.hpp"
#include "mffcn/synth.hpp"
#include "mffcn/training.hpp"

namespace mffcn::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kStrategyNames = {
    "early", "late", "mid-bottleneck", "mid-decoder", "multilayer"};

// Flags shared across subcommands. Each subcommand binds the subset it uses.
struct Flags {
  std::uint64_t seed = 0;
  std::size_t width_divisor = 1;
  std::string strategy = "multilayer";
  double lr = 2e-4;
  std::size_t batch = 8;
  std::size_t steps = 0;
  double snr_low = -10.0;
  double snr_high = 10.0;
  std::string data;
  std::string checkpoint;
  std::string out;
  double tolerance = 1e-4;
  std::size_t items = 16;
};

void ensure_directory(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string());
  }
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) {
    throw ConfigError(what + " not found: " + path.string());
  }
}

// [N, H, W] from N equally shaped [H, W] tensors.
Tensor stack(const std::vector<Tensor>& slices) {
  if (slices.empty()) throw ConfigError("nothing to stack");
  const Shape inner = slices.front().shape();
  std::vector<float> values;
  values.reserve(slices.size() * slices.front().size());
  for (const Tensor& t : slices) {
    if (t.shape() != inner) throw ShapeError("stack: slice shapes differ");
    values.insert(values.end(), t.data().begin(), t.data().end());
  }
  Shape shape{slices.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Tensor(std::move(shape), std::move(values));
}

std::vector<Tensor> unstack(const Tensor& t) {
  if (t.rank() < 3) throw ShapeError("unstack: need rank >= 3");
  Shape inner(t.shape().begin() + 1, t.shape().end());
  const std::size_t per = shape_size(inner);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    auto first = t.data().begin() + static_cast<std::ptrdiff_t>(i * per);
    out.emplace_back(inner, std::vector<float>(first, first + per));
  }
  return out;
}

std::string indexed(const std::string& stem, std::size_t i,
                    const std::string& suffix) {
  std::ostringstream os;
  os << stem << '_' << std::setw(3) << std::setfill('0') << i << suffix;
  return os.str();
}

void write_text(const fs::path& path,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  body(out);
  if (!out) throw ConfigError("write failed: " + path.string());
}

// Peak-limits a clip into [-1, 1] without clipping its shape.
AudioClip peak_limited(AudioClip clip) {
  float peak = 0.0f;
  for (float s : clip.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 1.0f) {
    const float g = 0.999f / peak;
    for (float& s : clip.samples) s *= g;
  }
  return clip;
}

double snr_of(const AudioClip& clean, const AudioClip& noisy) {
  double signal = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const double c = clean.samples[i];
    const double r = static_cast<double>(noisy.samples[i]) - c;
    signal += c * c;
    residual += r * r;
  }
  if (residual == 0.0) return kNoiselessSnrDb;
  return 10.0 * std::log10(signal / residual);
}

// --- gradcheck --------------------------------------------------------------

int cmd_gradcheck(const Flags& f) {
  if (!(f.tolerance >= 0.0)) throw ConfigError("--tolerance must be >= 0");
  GradcheckOptions options;
  options.seed = f.seed;
  options.width_divisor = f.width_divisor;
  options.tolerance = f.tolerance;
  const auto start = std::chrono::steady_clock::now();
  const GradcheckReport report =
      run_gradcheck_suite(options, [](const GradcheckResult& r) {
        std::cerr << "checked " << r.name << '\n';
      });
  print_gradcheck_table(std::cout, report);
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  std::cout << "elapsed " << std::fixed << std::setprecision(1) << seconds
            << " s\n";
  if (!report.all_passed()) {
    const GradcheckResult& w = report.worst();
    std::cerr << "gradcheck failed; worst: " << w.name << " rel-err "
              << std::scientific << w.max_relative_error << " at "
              << w.worst_entry << '\n';
    for (const GradcheckResult& r : report.results) {
      if (r.passed || r.max_relative_error >= f.tolerance) continue;
      std::cerr << "  " << r.name << ": " << r.skipped
                << " entries skipped at non-differentiable points\n";
    }
    return kExitGateFailed;
  }
  return kExitOk;
}

// --- trace-shapes -----------------------------------------------------------

int cmd_trace_shapes(const Flags& f) {
  const auto start = std::chrono::steady_clock::now();
  const EncoderTraceReport run = run_encoder_trace(f.width_divisor, f.seed);
  const std::vector<LayerShape> want_a = audio_trace(f.width_divisor);
  const std::vector<LayerShape> want_v = video_trace(f.width_divisor);
  bool ok = run.audio == want_a && run.video == want_v;
  std::cout << std::left << std::setw(7) << "layer" << std::setw(16)
            << "audio" << std::setw(16) << "expected" << std::setw(16)
            << "video" << std::setw(16) << "expected" << '\n';
  const std::size_t n = std::max(run.audio.size(), run.video.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto cell = [&](const std::vector<LayerShape>& v) {
      return i < v.size() ? v[i].to_string() : std::string("-");
    };
    const bool row_ok = cell(run.audio) == cell(want_a) &&
                        cell(run.video) == cell(want_v);
    std::cout << std::left << std::setw(7) << (i == 0 ? "input" : std::to_string(i))
              << std::setw(16) << cell(run.audio) << std::setw(16)
              << cell(want_a) << std::setw(16) << cell(run.video)
              << std::setw(16) << cell(want_v) << (row_ok ? "" : "MISMATCH")
              << '\n';
  }
  const LayerShape last{layer_channels(kEncoderLayers, f.width_divisor), 5, 1};
  ok = ok && !run.audio.empty() && !run.video.empty() &&
       run.audio.back() == last && run.video.back() == last;
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  std::cout << "both branches end at " << last.to_string() << ": "
            << (ok ? "yes" : "NO") << " (" << std::fixed
            << std::setprecision(1) << ms << " ms)\n";
  if (!ok) {
    std::cerr << "trace-shapes: traced shapes differ from the expected trace\n";
    return kExitGateFailed;
  }
  return kExitOk;
}

// --- train ------------------------------------------------------------------

TrainConfig train_config(const Flags& f) {
  TrainConfig c;
  c.learning_rate = f.lr;
  c.batch_size = f.batch;
  c.steps = f.steps;
  c.seed = f.seed;
  c.snr_low_db = f.snr_low;
  c.snr_high_db = f.snr_high;
  c.strategy = parse_strategy(f.strategy);
  c.width_divisor = f.width_divisor;
  c.validate();
  return c;
}

int cmd_train(const Flags& f) {
  const TrainConfig config = train_config(f);
  std::vector<SegmentTriple> data;
  if (!f.data.empty()) {
    data = load_triples(f.data);
    std::cout << "loaded " << data.size() << " segment triples from "
              << f.data << '\n';
  } else {
    if (f.items == 0) throw ConfigError("--items must be >= 1");
    SynthConfig synth;
    synth.snr_low_db = f.snr_low;
    synth.snr_high_db = f.snr_high;
    data = synth_dataset(f.seed, f.items, synth);
    std::cout << "synthesized " << data.size() << " segment triples (seed "
              << f.seed << ")\n";
  }
  const fs::path out = f.out;
  ensure_directory(out);
  const std::size_t every = std::max<std::size_t>(1, config.steps / 20);
  const TrainResult result =
      train(config, data, [&](std::size_t step, double loss) {
        if (step == 1 || step % every == 0 || step == config.steps) {
          std::cout << "step " << std::setw(6) << step << "  loss "
                    << std::setprecision(6) << loss << '\n';
        }
      });
  const fs::path ckpt =
      f.checkpoint.empty() ? out / "model.mffc" : fs::path(f.checkpoint);
  if (ckpt.has_parent_path()) ensure_directory(ckpt.parent_path());
  save_checkpoint(ckpt, result.model);
  write_loss_csv(out / "loss.csv", result.losses);
  std::cout << "wrote " << ckpt.string() << " and "
            << (out / "loss.csv").string() << '\n';
  return kExitOk;
}

// --- enhance ----------------------------------------------------------------

int cmd_enhance(const Flags& f) {
  const fs::path dir = f.data;
  require_file(f.checkpoint, "checkpoint");
  require_file(dir / "noisy.wav", "noisy audio");
  if (!fs::is_directory(dir / "frames")) {
    throw ConfigError("frame directory not found: " + (dir / "frames").string());
  }
  MffcnModel<float> model = load_checkpoint(f.checkpoint);
  const AudioClip noisy = read_wav(dir / "noisy.wav");
  const std::vector<Image> frames = read_frame_directory(dir / "frames");
  std::vector<MelSegment> noisy_mel = log_mel(noisy, "noisy");
  std::vector<VideoSegment> video = video_segments(frames, "frames");
  const std::size_t n = std::min(noisy_mel.size(), video.size());
  if (n == 0) {
    throw ConfigError("enhance: input holds no complete 200 ms audio/video "
                      "segment (" + std::to_string(noisy.samples.size()) +
                      " samples, " + std::to_string(frames.size()) +
                      " frames)");
  }
  noisy_mel.resize(n);
  video.resize(n);
  const std::vector<Tensor> enhanced = enhance_segments(model, noisy_mel, video);
  for (const Tensor& t : enhanced) {
    for (float v : t.data()) {
      if (!std::isfinite(v)) throw NumericError("enhance: non-finite output");
    }
  }

  std::vector<Tensor> noisy_values, clean_values;
  for (const MelSegment& s : noisy_mel) noisy_values.push_back(s.values);
  const bool has_clean = fs::is_regular_file(dir / "clean.wav");
  if (has_clean) {
    std::vector<MelSegment> clean_mel = log_mel(read_wav(dir / "clean.wav"));
    if (clean_mel.size() < n) {
      throw ConfigError("enhance: clean.wav is shorter than noisy.wav");
    }
    for (std::size_t i = 0; i < n; ++i) clean_values.push_back(clean_mel[i].values);
  }

  const fs::path out = f.out;
  ensure_directory(out);
  save_mten(out / "enhanced.mten", stack(enhanced));
  save_mten(out / "noisy.mten", stack(noisy_values));
  if (has_clean) save_mten(out / "clean.mten", stack(clean_values));
  for (std::size_t i = 0; i < n; ++i) {
    write_pgm(out / indexed("segment", i, "_noisy.pgm"),
              spectrogram_image(noisy_values[i]));
    write_pgm(out / indexed("segment", i, "_enhanced.pgm"),
              spectrogram_image(enhanced[i]));
    if (has_clean) {
      write_pgm(out / indexed("segment", i, "_clean.pgm"),
                spectrogram_image(clean_values[i]));
    }
  }
  write_wav(out / "enhanced.wav", peak_limited(waveform_proxy(noisy, enhanced)));

  std::cout << "enhanced " << n << " segments -> " << out.string() << '\n';
  if (has_clean) {
    double lsd_in = 0.0, lsd_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lsd_in += log_spectral_distance(noisy_values[i], clean_values[i]);
      lsd_out += log_spectral_distance(enhanced[i], clean_values[i]);
    }
    std::cout << "log-spectral distance to clean: noisy "
              << std::setprecision(5) << lsd_in / static_cast<double>(n)
              << ", enhanced " << lsd_out / static_cast<double>(n) << '\n';
  }
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

EvalClip read_clip_dir(const fs::path& dir) {
  require_file(dir / "clean.wav", "clean audio");
  require_file(dir / "noisy.wav", "noisy audio");
  EvalClip c;
  c.id = dir.filename().string();
  c.clean = read_wav(dir / "clean.wav");
  c.noisy = read_wav(dir / "noisy.wav");
  if (c.clean.samples.size() != c.noisy.samples.size()) {
    throw ConfigError(c.id + ": clean.wav and noisy.wav differ in length");
  }
  c.frames = read_frame_directory(dir / "frames");
  c.snr_db = snr_of(c.clean, c.noisy);
  return c;
}

std::vector<EvalClip> eval_clips(const Flags& f) {
  std::vector<EvalClip> clips;
  if (!f.data.empty()) {
    const fs::path dir = f.data;
    if (fs::is_regular_file(dir / "noisy.wav")) {
      clips.push_back(read_clip_dir(dir));
    } else {
      std::vector<fs::path> subdirs;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) subdirs.push_back(e.path());
      }
      std::sort(subdirs.begin(), subdirs.end());
      for (const fs::path& p : subdirs) clips.push_back(read_clip_dir(p));
    }
    if (clips.empty()) throw ConfigError("no clips found under " + f.data);
    return clips;
  }
  if (f.items == 0) throw ConfigError("--items must be >= 1");
  std::vector<double> snrs = {f.snr_low};
  if (f.snr_high != f.snr_low) snrs.push_back(f.snr_high);
  for (double snr : snrs) {
    auto part = synth_eval_clips(f.seed, f.items, 10, snr,
                                 NoiseKind::kBroadband);
    clips.insert(clips.end(), part.begin(), part.end());
  }
  return clips;
}

int cmd_eval(const Flags& f) {
  require_file(f.checkpoint, "checkpoint");
  MffcnModel<float> model = load_checkpoint(f.checkpoint);
  const std::vector<EvalClip> clips = eval_clips(f);
  const EvalReport report = evaluate(model, clips, f.seed);
  const fs::path out = f.out;
  ensure_directory(out);
  write_text(out / "report.csv",
             [&](std::ostream& os) { write_report_csv(os, report); });
  std::cout << std::left << std::setw(24) << "clip" << std::right
            << std::setw(8) << "snr" << std::setw(10) << "STOI(%)"
            << std::setw(10) << "SI-SDR" << std::setw(10) << "LSD" << '\n'
            << std::fixed << std::setprecision(3);
  for (const EvalItem& i : report.items) {
    std::cout << std::left << std::setw(24) << i.id << std::right
              << std::setw(8) << i.snr_db << std::setw(10) << i.stoi_percent
              << std::setw(10) << i.si_sdr_db << std::setw(10)
              << i.log_spectral_distance << '\n';
  }
  std::cout << std::left << std::setw(32) << "mean" << std::right
            << std::setw(10) << report.mean_stoi_percent << std::setw(10)
            << report.mean_si_sdr_db << std::setw(10)
            << report.mean_log_spectral_distance << '\n';
  if (!report.all_finite()) {
    std::cerr << "eval: non-finite metric values\n";
    return kExitNumeric;
  }
  return kExitOk;
}

// --- ablate -----------------------------------------------------------------

int cmd_ablate(const Flags& f) {
  AblationConfig config;
  config.train = train_config(f);
  config.train_items = f.items;
  if (f.items == 0) throw ConfigError("--items must be >= 1");
  const AblationReport report = run_ablation(
      config, std::vector<FusionStrategy>(kAllStrategies.begin(), kAllStrategies.end()),
      [](const std::string& m) { std::cerr << m << '\n'; });
  const fs::path out = f.out;
  ensure_directory(out);
  write_text(out / "ablation.csv",
             [&](std::ostream& os) { write_ablation_csv(os, report); });
  write_text(out / "ablation.txt",
             [&](std::ostream& os) { write_ablation_table(os, report); });
  write_ablation_table(std::cout, report);
  if (!report.all_finite()) {
    std::cerr << "ablate: non-finite values in the report\n";
    return kExitNumeric;
  }
  return kExitOk;
}

// --- export-spec ------------------------------------------------------------

int cmd_export_spec(const Flags& f) {
  const fs::path in = f.data;
  const fs::path out = f.out;
  if (fs::is_directory(in)) {
    // Frame directory -> [T, H, W] MTEN.
    const std::vector<Image> frames = read_frame_directory(in);
    if (frames.empty()) throw ConfigError("no frames in " + in.string());
    std::vector<float> values;
    for (const Image& img : frames) {
      if (img.height != frames[0].height || img.width != frames[0].width) {
        throw ShapeError("frames differ in size");
      }
      values.insert(values.end(), img.pixels.begin(), img.pixels.end());
    }
    const fs::path target =
        out.extension() == ".mten" ? out : out / "frames.mten";
    if (target.has_parent_path()) ensure_directory(target.parent_path());
    save_mten(target, Tensor({frames.size(), frames[0].height, frames[0].width},
                             std::move(values)));
    std::cout << "wrote " << target.string() << '\n';
    return kExitOk;
  }
  require_file(in, "input");
  if (in.extension() == ".pgm") {
    const Image img = read_pgm(in);
    const fs::path target =
        out.extension() == ".mten" ? out : out / (in.stem().string() + ".mten");
    if (target.has_parent_path()) ensure_directory(target.parent_path());
    save_mten(target, Tensor({img.height, img.width}, img.pixels));
    std::cout << "wrote " << target.string() << '\n';
    return kExitOk;
  }
  if (in.extension() != ".mten") {
    throw ConfigError("export-spec: expected a .mten or .pgm file or a frame "
                      "directory, got " + in.string());
  }
  Tensor t = load_mten(in);
  // Drop singleton channel axes: [N,1,H,W] -> [N,H,W].
  if (t.rank() == 4 && t.dim(1) == 1) {
    t = Tensor({t.dim(0), t.dim(2), t.dim(3)},
               std::vector<float>(t.data().begin(), t.data().end()));
  }
  ensure_directory(out);
  const std::string stem = in.stem().string();
  std::vector<std::pair<std::string, Tensor>> maps;
  if (t.rank() == 2) {
    maps.emplace_back(stem, t);
  } else if (t.rank() == 3) {
    const std::vector<Tensor> slices = unstack(t);
    for (std::size_t i = 0; i < slices.size(); ++i) {
      maps.emplace_back(indexed(stem, i, ""), slices[i]);
    }
  } else {
    throw ShapeError("export-spec: expected an MTEN of rank 2 or 3, got rank " +
                     std::to_string(t.rank()));
  }
  for (const auto& [name, map] : maps) {
    for (float v : map.data()) {
      if (!std::isfinite(v)) {
        throw NumericError("export-spec: " + name + " holds non-finite values");
      }
    }
    write_pgm(out / (name + ".pgm"), spectrogram_image(map));
    write_csv(out / (name + ".csv"), map);
  }
  std::cout << "wrote " << maps.size() << " PGM/CSV pair(s) to "
            << out.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Audio-visual speech enhancement toolkit", "mffcn"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "Read flags from a TOML/INI file");

  // One flag set per subcommand so per-command defaults stay independent.
  Flags gf, tf, trf, enf, evf, abf, exf;
  gf.width_divisor = 16;
  abf.width_divisor = 8;
  abf.steps = 50;
  evf.items = 4;
  evf.snr_low = -5.0;
  evf.snr_high = 0.0;

  auto seed = [](CLI::App* c, Flags& f) {
    c->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  };
  auto width = [](CLI::App* c, Flags& f, const char* help) {
    c->add_option("--width-divisor", f.width_divisor, help)
        ->capture_default_str();
  };
  const char* kWidthHelp =
      "Divide every channel count by this power of two (1-64)";
  auto training = [](CLI::App* c, Flags& f) {
    c->add_option("--strategy", f.strategy, "Fusion strategy")
        ->check(CLI::IsMember(kStrategyNames))
        ->capture_default_str();
    c->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
    c->add_option("--batch", f.batch, "Batch size")->capture_default_str();
    c->add_option("--steps", f.steps, "Optimizer steps")->capture_default_str();
    c->add_option("--snr-low", f.snr_low, "Lowest training SNR (dB)")
        ->capture_default_str();
    c->add_option("--snr-high", f.snr_high, "Highest training SNR (dB)")
        ->capture_default_str();
    c->add_option("--items", f.items,
                  "Synthetic training items when --data is not given")
        ->capture_default_str();
  };

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Compare reverse-mode gradients with finite differences");
  seed(gradcheck, gf);
  width(gradcheck, gf, "Channel divisor of the end-to-end model");
  gradcheck
      ->add_option("--tolerance", gf.tolerance,
                   "Maximum relative error (0 always fails)")
      ->capture_default_str();

  CLI::App* trace = app.add_subcommand(
      "trace-shapes", "Run both encoder branches and check every layer shape");
  seed(trace, tf);
  width(trace, tf, kWidthHelp);

  CLI::App* train_cmd = app.add_subcommand(
      "train", "Train on segment triples (MTEN directory) or synthetic data");
  seed(train_cmd, trf);
  width(train_cmd, trf, kWidthHelp);
  training(train_cmd, trf);
  train_cmd->add_option("--data", trf.data,
                        "Directory with noisy.mten, video.mten, clean.mten");
  train_cmd->add_option("--checkpoint", trf.checkpoint,
                        "Checkpoint path (default <out>/model.mffc)");
  train_cmd->add_option("--out", trf.out, "Output directory")->required();

  CLI::App* enhance = app.add_subcommand(
      "enhance", "Enhance noisy.wav + frames/ in --data with a checkpoint");
  enhance->add_option("--checkpoint", enf.checkpoint, "Model checkpoint")
      ->required();
  enhance
      ->add_option("--data", enf.data,
                   "Directory with noisy.wav, frames/ and optionally clean.wav")
      ->required();
  enhance->add_option("--out", enf.out, "Output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score a checkpoint with STOI, SI-SDR and log-spectral distance");
  seed(eval_cmd, evf);
  eval_cmd->add_option("--checkpoint", evf.checkpoint, "Model checkpoint")
      ->required();
  eval_cmd->add_option(
      "--data", evf.data,
      "Clip directory (clean.wav, noisy.wav, frames/) or a directory of them; "
      "synthetic held-out clips when omitted");
  eval_cmd->add_option("--items", evf.items, "Synthetic clips per SNR")
      ->capture_default_str();
  eval_cmd->add_option("--snr-low", evf.snr_low, "First synthetic SNR (dB)")
      ->capture_default_str();
  eval_cmd->add_option("--snr-high", evf.snr_high, "Second synthetic SNR (dB)")
      ->capture_default_str();
  eval_cmd->add_option("--out", evf.out, "Output directory")->required();

  CLI::App* ablate = app.add_subcommand(
      "ablate", "Train and score all five fusion strategies identically");
  seed(ablate, abf);
  width(ablate, abf, kWidthHelp);
  training(ablate, abf);
  ablate->add_option("--out", abf.out, "Output directory")->required();

  CLI::App* export_spec = app.add_subcommand(
      "export-spec",
      "Convert MTEN to PGM + CSV, or PGM / frame directories to MTEN");
  export_spec
      ->add_option("--data", exf.data, "Input .mten, .pgm or frame directory")
      ->required();
  export_spec->add_option("--out", exf.out, "Output directory or .mten path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(gf);
    if (*trace) return cmd_trace_shapes(tf);
    if (*train_cmd) return cmd_train(trf);
    if (*enhance) return cmd_enhance(enf);
    if (*eval_cmd) return cmd_eval(evf);
    if (*ablate) return cmd_ablate(abf);
    if (*export_spec) return cmd_export_spec(exf);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const FormatError& e) {
    std::cerr << "bad input: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const ConfigError& e) {
    std::cerr << "bad input: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const ShapeError& e) {
    std::cerr << "bad input: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "bad input: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace mffcn::cli
