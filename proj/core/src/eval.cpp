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

#include "mffcn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mffcn/errors.hpp"
#include "mffcn/fft.hpp"

namespace mffcn {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const MelFilterbank& default_bank() {
  static const MelFilterbank bank = mel_filterbank();
  return bank;
}

double energy(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc;
}

constexpr double kMaxProxyGain = 10.0;  // amplitude, +20 dB

}  // namespace

double si_sdr(const AudioClip& clean, const AudioClip& processed) {
  if (clean.samples.size() != processed.samples.size()) {
    throw ConfigError("si_sdr: clips differ in length (" +
                      std::to_string(clean.samples.size()) + " vs " +
                      std::to_string(processed.samples.size()) + ")");
  }
  const double ss = energy(clean.samples);
  const double pp = energy(processed.samples);
  if (!(ss > 0.0)) throw NumericError("si_sdr: the clean clip has no energy");
  if (!(pp > 0.0)) {
    throw NumericError("si_sdr: the processed clip has no energy");
  }
  if (!std::isfinite(ss) || !std::isfinite(pp)) {
    throw NumericError("si_sdr: non-finite samples");
  }
  double sp = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    sp += static_cast<double>(clean.samples[i]) * processed.samples[i];
  }
  const double alpha = sp / ss;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const double t = alpha * clean.samples[i];
    const double r = processed.samples[i] - t;
    target += t * t;
    residual += r * r;
  }
  if (residual == 0.0) return kSiSdrCapDb;
  if (target == 0.0) return -kSiSdrCapDb;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCapDb,
                    kSiSdrCapDb);
}

double log_spectral_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("log_spectral_distance: shapes differ, " +
                     shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.at(i)) - b.at(i);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double log_spectral_distance(const MelSegment& a, const MelSegment& b) {
  return log_spectral_distance(a.values, b.values);
}

std::size_t covered_samples(std::size_t segments) {
  return synth_samples(segments);
}

AudioClip waveform_proxy(const AudioClip& noisy,
                         const std::vector<Tensor>& enhanced) {
  if (enhanced.empty()) throw ConfigError("waveform_proxy: no segments");
  const std::size_t length = covered_samples(enhanced.size());
  if (noisy.samples.size() < length) {
    throw ConfigError("waveform_proxy: " + std::to_string(enhanced.size()) +
                      " segments need " + std::to_string(length) +
                      " noisy samples, got " +
                      std::to_string(noisy.samples.size()));
  }
  for (const Tensor& s : enhanced) {
    if (s.shape() != Shape{kMelBins, kSegmentFrames}) {
      throw ShapeError("waveform_proxy: enhanced segments must be [80,20], "
                       "got " + shape_string(s.shape()));
    }
  }
  Spectrogram spec = stft(noisy);
  const MelFilterbank& bank = default_bank();
  const std::vector<double> noisy_mel = log_mel_spectrogram(spec, bank);
  const std::size_t frames = kSegmentFrames * enhanced.size();

  std::vector<double> coverage(bank.fft_bins, 0.0);
  for (std::size_t m = 0; m < bank.n_mels; ++m) {
    for (std::size_t k = 0; k < bank.fft_bins; ++k) {
      coverage[k] += bank.weight(m, k);
    }
  }

  std::vector<double> mel_gain(bank.n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    const Tensor& seg = enhanced[t / kSegmentFrames];
    const std::size_t col = t % kSegmentFrames;
    for (std::size_t m = 0; m < bank.n_mels; ++m) {
      const double s = seg.at(m * kSegmentFrames + col);
      mel_gain[m] = std::exp(std::min(s - noisy_mel[m * spec.frames + t], 50.0));
    }
    for (std::size_t k = 0; k < bank.fft_bins; ++k) {
      double power_gain = 1.0;
      if (coverage[k] > 0.0) {
        double acc = 0.0;
        for (std::size_t m = 0; m < bank.n_mels; ++m) {
          acc += bank.weight(m, k) * mel_gain[m];
        }
        power_gain = acc / coverage[k];
      }
      const double amp = std::min(std::sqrt(power_gain), kMaxProxyGain);
      spec.values[t * spec.bins + k] *= amp;
    }
  }

  // Weighted overlap-add with the analysis window as synthesis window.
  const std::vector<double> w = hann_window(kWindowLength);
  RealFft fft(kWindowLength);
  std::vector<double> out(length, 0.0), norm(length, 0.0), frame(kWindowLength);
  for (std::size_t t = 0; t < frames; ++t) {
    fft.inverse(std::span(spec.values).subspan(t * spec.bins, spec.bins),
                frame);
    for (std::size_t n = 0; n < kWindowLength; ++n) {
      out[t * kHopLength + n] += w[n] * frame[n];
      norm[t * kHopLength + n] += w[n] * w[n];
    }
  }
  AudioClip clip;
  clip.samples.resize(length);
  for (std::size_t n = 0; n < length; ++n) {
    clip.samples[n] =
        norm[n] > 1e-8 ? static_cast<float>(out[n] / norm[n]) : 0.0f;
  }
  return clip;
}

bool EvalReport::all_finite() const {
  if (!std::isfinite(mean_stoi_percent) || !std::isfinite(mean_si_sdr_db) ||
      !std::isfinite(mean_log_spectral_distance)) {
    return false;
  }
  return std::all_of(items.begin(), items.end(), [](const EvalItem& i) {
    return std::isfinite(i.stoi_percent) && std::isfinite(i.si_sdr_db) &&
           std::isfinite(i.log_spectral_distance);
  });
}

std::vector<Tensor> enhance_segments(MffcnModel<float>& model,
                                     const std::vector<MelSegment>& noisy,
                                     const std::vector<VideoSegment>& video) {
  if (noisy.size() != video.size()) {
    throw ConfigError("enhance: " + std::to_string(noisy.size()) +
                      " audio segments vs " + std::to_string(video.size()) +
                      " video segments");
  }
  std::vector<SegmentTriple> items(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    items[i].noisy = noisy[i];
    items[i].clean = noisy[i];  // unused target slot
    items[i].video = video[i];
  }
  constexpr std::size_t kChunk = 8;
  std::vector<Tensor> out;
  for (std::size_t begin = 0; begin < items.size(); begin += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(items.size(), begin + kChunk); ++i)
      idx.push_back(i);
    const Batch batch = make_batch(items, idx);
    const Tensor pred = model.forward(batch.noisy, batch.video, Mode::kEval);
    const std::size_t per = kMelBins * kSegmentFrames;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      auto first = pred.data().begin() + static_cast<std::ptrdiff_t>(j * per);
      out.emplace_back(Shape{kMelBins, kSegmentFrames},
                       std::vector<float>(first, first + per));
    }
  }
  return out;
}

EvalItem evaluate_clip(MffcnModel<float>& model, const EvalClip& clip) {
  if (clip.clean.samples.size() != clip.noisy.samples.size()) {
    throw ConfigError("evaluate: clean and noisy audio of " + clip.id +
                      " differ in length");
  }
  std::vector<MelSegment> noisy = log_mel(clip.noisy, clip.id);
  const std::vector<MelSegment> clean = log_mel(clip.clean, clip.id);
  std::vector<VideoSegment> video = video_segments(clip.frames, clip.id);
  const std::size_t n = std::min(noisy.size(), video.size());
  if (n == 0) {
    throw ConfigError("evaluate: " + clip.id +
                      " has no complete audio/video segment");
  }
  noisy.resize(n);
  video.resize(n);
  const std::vector<Tensor> enhanced = enhance_segments(model, noisy, video);

  EvalItem item;
  item.id = clip.id;
  item.snr_db = clip.snr_db;
  double lsd = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    lsd += log_spectral_distance(enhanced[k], clean[k].values);
  }
  item.log_spectral_distance = lsd / static_cast<double>(n);

  const AudioClip proxy = waveform_proxy(clip.noisy, enhanced);
  AudioClip reference;
  reference.samples.assign(clip.clean.samples.begin(),
                           clip.clean.samples.begin() +
                               static_cast<std::ptrdiff_t>(proxy.samples.size()));
  item.stoi_percent = 100.0 * stoi(reference, proxy);
  item.si_sdr_db = si_sdr(reference, proxy);
  return item;
}

EvalReport evaluate(MffcnModel<float>& model,
                    const std::vector<EvalClip>& clips, std::uint64_t seed) {
  if (clips.empty()) throw ConfigError("evaluate: no clips");
  EvalReport report;
  report.strategy = std::string(strategy_name(model.config().strategy));
  report.seed = seed;
  for (const EvalClip& c : clips) report.items.push_back(evaluate_clip(model, c));
  const double n = static_cast<double>(report.items.size());
  for (const EvalItem& i : report.items) {
    report.mean_stoi_percent += i.stoi_percent / n;
    report.mean_si_sdr_db += i.si_sdr_db / n;
    report.mean_log_spectral_distance += i.log_spectral_distance / n;
  }
  return report;
}

std::vector<EvalClip> synth_eval_clips(std::uint64_t seed, std::size_t count,
                                       std::size_t segments, double snr_db,
                                       NoiseKind noise) {
  std::vector<EvalClip> clips;
  for (std::size_t i = 0; i < count; ++i) {
    SynthClip s = synth_clip(mix_seed(seed, 0xe1a1 + i), segments, noise);
    EvalClip c;
    std::ostringstream id;
    id << "heldout-" << i << "@" << snr_db << "dB";
    c.id = id.str();
    c.noisy = mix_at_snr(s.clean, s.noise, snr_db).mixture;
    c.clean = std::move(s.clean);
    c.frames = std::move(s.frames);
    c.snr_db = snr_db;
    clips.push_back(std::move(c));
  }
  return clips;
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "strategy,seed,item,snr_db,stoi_percent,si_sdr_db,"
         "log_spectral_distance\n"
      << std::setprecision(10);
  for (const EvalItem& i : r.items) {
    out << r.strategy << ',' << r.seed << ',' << i.id << ',' << i.snr_db << ','
        << i.stoi_percent << ',' << i.si_sdr_db << ','
        << i.log_spectral_distance << '\n';
  }
  out << r.strategy << ',' << r.seed << ",mean,," << r.mean_stoi_percent << ','
      << r.mean_si_sdr_db << ',' << r.mean_log_spectral_distance << '\n';
}

// ---------------------------------------------------------------------------

bool AblationReport::all_finite() const {
  for (const AblationCell& c : cells) {
    if (!c.report.all_finite()) return false;
  }
  return std::all_of(final_train_loss.begin(), final_train_loss.end(),
                     [](double v) { return std::isfinite(v); });
}

AblationReport run_ablation(const AblationConfig& config,
                            const std::vector<FusionStrategy>& strategies,
                            const AblationProgress& progress) {
  config.train.validate();
  if (strategies.empty()) throw ConfigError("ablation: no strategies");
  if (config.eval_snrs_db.empty()) throw ConfigError("ablation: no SNRs");
  SynthConfig synth;
  synth.snr_low_db = config.train.snr_low_db;
  synth.snr_high_db = config.train.snr_high_db;
  synth.noise = config.noise;
  const std::vector<SegmentTriple> data =
      synth_dataset(config.train.seed, config.train_items, synth);
  std::vector<std::vector<EvalClip>> heldout;
  for (double snr : config.eval_snrs_db) {
    heldout.push_back(synth_eval_clips(mix_seed(config.train.seed, 0xab1a7e),
                                       config.eval_clips, config.eval_segments,
                                       snr, config.noise));
  }

  AblationReport report;
  report.strategies = strategies;
  report.snrs_db = config.eval_snrs_db;
  for (FusionStrategy s : strategies) {
    TrainConfig tc = config.train;
    tc.strategy = s;
    if (progress) {
      progress("training " + std::string(strategy_name(s)) + " for " +
               std::to_string(tc.steps) + " steps");
    }
    TrainResult result = train(tc, data);
    report.final_train_loss.push_back(
        result.losses.empty() ? evaluate_loss(result.model, data)
                              : result.losses.back());
    for (std::size_t j = 0; j < config.eval_snrs_db.size(); ++j) {
      report.cells.push_back({s, config.eval_snrs_db[j],
                              evaluate(result.model, heldout[j], tc.seed)});
    }
  }
  return report;
}

void write_ablation_csv(std::ostream& out, const AblationReport& r) {
  out << "strategy,snr_db,stoi_percent,si_sdr_db,log_spectral_distance,"
         "final_train_loss\n"
      << std::setprecision(10);
  for (std::size_t s = 0; s < r.strategies.size(); ++s) {
    for (std::size_t j = 0; j < r.snrs_db.size(); ++j) {
      const EvalReport& e = r.cell(s, j).report;
      out << strategy_name(r.strategies[s]) << ',' << r.snrs_db[j] << ','
          << e.mean_stoi_percent << ',' << e.mean_si_sdr_db << ','
          << e.mean_log_spectral_distance << ',' << r.final_train_loss[s]
          << '\n';
    }
  }
}

void write_ablation_table(std::ostream& out, const AblationReport& r) {
  out << "Fusion-strategy comparison (synthetic data). PESQ is not computed:\n"
         "SI-SDR and log-Mel spectral distance stand in for it. Waveform\n"
         "metrics are measured on a Mel-gain resynthesis of the noisy input.\n\n";
  std::size_t label_w = 8;
  for (FusionStrategy s : r.strategies) {
    label_w = std::max(label_w, strategy_label(s).size());
  }
  auto snr_tag = [](double snr) {
    std::ostringstream os;
    os << snr << "dB";
    return os.str();
  };
  const char* metrics[] = {"STOI(%)", "SI-SDR", "LSD"};
  out << std::left << std::setw(static_cast<int>(label_w)) << "Strategy";
  for (const char* m : metrics) {
    for (double snr : r.snrs_db) {
      out << "  " << std::right << std::setw(14)
          << (std::string(m) + "@" + snr_tag(snr));
    }
  }
  out << '\n';
  out << std::fixed << std::setprecision(3);
  for (std::size_t s = 0; s < r.strategies.size(); ++s) {
    out << std::left << std::setw(static_cast<int>(label_w))
        << strategy_label(r.strategies[s]);
    for (int metric = 0; metric < 3; ++metric) {
      for (std::size_t j = 0; j < r.snrs_db.size(); ++j) {
        const EvalReport& e = r.cell(s, j).report;
        const double v = metric == 0   ? e.mean_stoi_percent
                         : metric == 1 ? e.mean_si_sdr_db
                                       : e.mean_log_spectral_distance;
        out << "  " << std::right << std::setw(14) << v;
      }
    }
    out << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace mffcn
