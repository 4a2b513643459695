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

#include "mffcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <string>

#include "mffcn/errors.hpp"
#include "mffcn/mten.hpp"
#include "mffcn/ops.hpp"
#include "mffcn/tape.hpp"

namespace mffcn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(snr_low_db <= snr_high_db)) {
    throw ConfigError("SNR range must be ordered (low <= high)");
  }
  validate_width_divisor(width_divisor);
}

template <typename T>
AdamState AdamState::for_parameters(
    const std::vector<NamedParameter<T>>& params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.size(), 0.0);
    state.second_moment.emplace_back(p.value.size(), 0.0);
  }
  return state;
}

template <typename T>
void adam_step(const std::vector<NamedParameter<T>>& params, AdamState& state,
               double learning_rate) {
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ConfigError("adam_step: optimizer state has " +
                      std::to_string(state.first_moment.size()) +
                      " moment buffers for " + std::to_string(params.size()) +
                      " parameters");
  }
  for (const auto& p : params) {
    if (!p.value.has_grad_buffer()) {
      throw TapeError("adam_step: no gradient for parameter " + p.name);
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    BasicTensor<T> value = params[i].value;
    std::vector<double>& m = state.first_moment[i];
    std::vector<double>& v = state.second_moment[i];
    if (m.size() != value.size() || v.size() != value.size()) {
      throw ConfigError("adam_step: moment buffer shape mismatch for " +
                        params[i].name);
    }
    const auto g = value.grad();
    auto x = value.mutable_data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double gj = g[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      x[j] = static_cast<T>(static_cast<double>(x[j]) -
                            learning_rate * m_hat /
                                (std::sqrt(v_hat) + state.eps));
    }
  }
}

template AdamState AdamState::for_parameters(
    const std::vector<NamedParameter<float>>&);
template AdamState AdamState::for_parameters(
    const std::vector<NamedParameter<double>>&);
template void adam_step(const std::vector<NamedParameter<float>>&, AdamState&,
                        double);
template void adam_step(const std::vector<NamedParameter<double>>&, AdamState&,
                        double);

Batch make_batch(std::span<const SegmentTriple> items,
                 std::span<const std::size_t> indices) {
  if (indices.empty()) throw ConfigError("make_batch: empty batch");
  const std::size_t b = indices.size();
  const std::size_t mel = kMelBins * kSegmentFrames;
  const std::size_t vid = kVideoFramesPerSegment * kVideoSize * kVideoSize;
  std::vector<float> noisy(b * mel), clean(b * mel), video(b * vid);
  for (std::size_t i = 0; i < b; ++i) {
    if (indices[i] >= items.size()) {
      throw ConfigError("make_batch: index out of range");
    }
    const SegmentTriple& item = items[indices[i]];
    if (item.noisy.values.shape() != Shape{kMelBins, kSegmentFrames} ||
        item.clean.values.shape() != Shape{kMelBins, kSegmentFrames} ||
        item.video.frames.shape() !=
            Shape{kVideoFramesPerSegment, kVideoSize, kVideoSize}) {
      throw ShapeError("make_batch: item " + std::to_string(indices[i]) +
                       " does not have [80,20] audio and [5,80,80] video");
    }
    std::ranges::copy(item.noisy.values.data(), noisy.begin() + i * mel);
    std::ranges::copy(item.clean.values.data(), clean.begin() + i * mel);
    std::ranges::copy(item.video.frames.data(), video.begin() + i * vid);
  }
  return {Tensor({b, 1, kMelBins, kSegmentFrames}, std::move(noisy)),
          Tensor({b, kVideoFramesPerSegment, kVideoSize, kVideoSize},
                 std::move(video)),
          Tensor({b, 1, kMelBins, kSegmentFrames}, std::move(clean))};
}

namespace {

// Seeded shuffle that reshuffles each time it is exhausted.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    shuffle();
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    while (out.size() < batch) {
      if (pos_ == order_.size()) shuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void shuffle() {
    // Fisher-Yates with a bias-free draw that does not depend on the
    // standard library's distribution implementation.
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::uint64_t bound = i;
      const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
      std::uint64_t r;
      do r = rng_(); while (r >= limit);
      std::swap(order_[i - 1], order_[r % bound]);
    }
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

std::string first_non_finite(const MffcnModel<float>& model) {
  for (const auto& p : model.parameters()) {
    if (!all_finite(p.value.data())) return p.name;
    if (p.value.has_grad_buffer() && !all_finite(p.value.grad())) {
      return p.name + " (gradient)";
    }
  }
  for (const auto& [name, s] : model.batch_norm_states()) {
    if (!all_finite(s.running_mean.data()) || !all_finite(s.running_var.data()))
      return name + " (running statistics)";
  }
  return "";
}

[[noreturn]] void numeric_abort(std::size_t step, const MffcnModel<float>& m,
                                const std::string& detail) {
  std::string culprit = first_non_finite(m);
  if (culprit.empty()) culprit = "none (activations overflowed)";
  throw NumericError("training diverged at step " + std::to_string(step) +
                     ": " + detail + "; offending parameter: " + culprit);
}

}  // namespace

TrainResult train(const TrainConfig& config,
                  std::span<const SegmentTriple> data,
                  const StepCallback& on_step) {
  config.validate();
  if (data.empty()) throw ConfigError("train: the dataset is empty");
  TrainResult result{{},
                     MffcnModel<float>({config.strategy, config.width_divisor},
                                       config.seed)};
  MffcnModel<float>& model = result.model;
  AdamState adam = AdamState::for_parameters(model.parameters());
  BatchSampler sampler(data.size(), config.seed ^ 0xba7c4e5ULL);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const std::vector<std::size_t> idx = sampler.next(config.batch_size);
    const Batch batch = make_batch(data, idx);
    model.zero_grad();
    Tape<float> tape;
    double loss_value = 0.0;
    {
      TapeScope<float> scope(tape);
      Tensor loss;
      try {
        const Tensor pred = model.forward(batch.noisy, batch.video, Mode::kTrain);
        loss = mse_loss(pred, batch.clean);
      } catch (const NumericError& e) {
        numeric_abort(step, model, e.what());
      }
      loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        numeric_abort(step, model, "loss is not finite");
      }
      tape.backward(loss);
    }
    if (!first_non_finite(model).empty()) {
      numeric_abort(step, model, "non-finite gradient");
    }
    adam_step(model.parameters(), adam, config.learning_rate);
    if (!first_non_finite(model).empty()) {
      numeric_abort(step, model, "non-finite parameter after update");
    }
    result.losses.push_back(loss_value);
    if (on_step) on_step(step, loss_value);
  }
  return result;
}

double evaluate_loss(MffcnModel<float>& model,
                     std::span<const SegmentTriple> data) {
  if (data.empty()) throw ConfigError("evaluate_loss: the dataset is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t idx[] = {i};
    const Batch batch = make_batch(data, idx);
    total += mse_loss(model.forward(batch.noisy, batch.video, Mode::kEval),
                      batch.clean)
                 .item();
  }
  return total / static_cast<double>(data.size());
}

void write_loss_csv(const std::filesystem::path& path,
                    std::span<const double> losses) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "step,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << i + 1 << ',' << losses[i] << '\n';
  }
}

std::vector<SegmentTriple> load_triples(const std::filesystem::path& dir) {
  const Tensor noisy = load_mten(dir / "noisy.mten");
  const Tensor video = load_mten(dir / "video.mten");
  const Tensor clean = load_mten(dir / "clean.mten");
  const Shape mel{kMelBins, kSegmentFrames};
  const Shape vid{kVideoFramesPerSegment, kVideoSize, kVideoSize};
  auto check = [&](const Tensor& t, const Shape& item, const char* name) {
    Shape tail(t.shape().begin() + (t.rank() > 0 ? 1 : 0), t.shape().end());
    if (t.rank() != item.size() + 1 || tail != item) {
      throw FormatError(std::string(name) + ".mten must be [N," +
                        shape_string(item).substr(1) + ", got " +
                        shape_string(t.shape()));
    }
  };
  check(noisy, mel, "noisy");
  check(video, vid, "video");
  check(clean, mel, "clean");
  const std::size_t n = noisy.dim(0);
  if (video.dim(0) != n || clean.dim(0) != n) {
    throw FormatError("noisy/video/clean MTEN files disagree on item count");
  }
  std::vector<SegmentTriple> items(n);
  const std::size_t m = shape_size(mel), v = shape_size(vid);
  for (std::size_t i = 0; i < n; ++i) {
    auto slice = [](const Tensor& t, std::size_t off, std::size_t len,
                    const Shape& s) {
      auto first = t.data().begin() + static_cast<std::ptrdiff_t>(off);
      return Tensor(s, std::vector<float>(
                           first, first + static_cast<std::ptrdiff_t>(len)));
    };
    items[i].noisy.values = slice(noisy, i * m, m, mel);
    items[i].clean.values = slice(clean, i * m, m, mel);
    items[i].video.frames = slice(video, i * v, v, vid);
    items[i].noisy.origin = items[i].clean.origin = {dir.string(), i};
    items[i].video.origin = {dir.string(), i};
  }
  return items;
}

void save_triples(const std::filesystem::path& dir,
                  std::span<const SegmentTriple> items) {
  if (items.empty()) throw ConfigError("save_triples: nothing to save");
  std::filesystem::create_directories(dir);
  std::vector<std::size_t> all(items.size());
  std::iota(all.begin(), all.end(), 0);
  const Batch b = make_batch(items, all);
  const std::size_t n = items.size();
  save_mten(dir / "noisy.mten",
            Tensor({n, kMelBins, kSegmentFrames},
                   {b.noisy.data().begin(), b.noisy.data().end()}));
  save_mten(dir / "clean.mten",
            Tensor({n, kMelBins, kSegmentFrames},
                   {b.clean.data().begin(), b.clean.data().end()}));
  save_mten(dir / "video.mten", b.video);
}

}  // namespace mffcn
