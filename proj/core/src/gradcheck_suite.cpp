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

#include "mffcn/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "mffcn/dsp.hpp"
#include "mffcn/errors.hpp"
#include "mffcn/gradcheck.hpp"
#include "mffcn/lstm.hpp"
#include "mffcn/ops.hpp"
#include "mffcn/tape.hpp"

namespace mffcn {

namespace {

using Outputs = std::vector<Tensor64>;
using Builder = std::function<Outputs(const std::vector<Tensor64>&)>;

class Random {
 public:
  explicit Random(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53);
  }
  Tensor64 tensor(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = uniform(lo, hi);
    return Tensor64(std::move(shape), std::move(v));
  }
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform(0.0, 1.0) * static_cast<double>(n));
  }

 private:
  std::mt19937_64 rng_;
};

struct Accumulator {
  GradcheckResult result;

  void compare(double analytic, double numeric, const std::string& where) {
    const double e = relative_error(analytic, numeric);
    ++result.entries;
    if (result.entries == 1 || e > result.max_relative_error) {
      result.max_relative_error = e;
      std::ostringstream os;
      os << where << " analytic " << std::setprecision(6) << analytic
         << " numeric " << numeric;
      result.worst_entry = os.str();
    }
  }
};

// Loss = sum_k sum(R_k * out_k) with fixed random projections R_k, so every
// output entry receives a distinct upstream gradient.
void check_op(Accumulator& acc, std::vector<Tensor64> inputs,
              const Builder& build, Random& rng, double eps) {
  for (Tensor64& x : inputs) x.set_requires_grad(true);
  std::vector<Tensor64> projections;
  {
    const Outputs probe = build(inputs);
    for (const Tensor64& out : probe) {
      projections.push_back(rng.tensor(out.shape()));
    }
  }
  auto loss_of = [&](const Outputs& outs) {
    Tensor64 total;
    for (std::size_t k = 0; k < outs.size(); ++k) {
      Tensor64 term = sum(elementwise_mul(outs[k], projections[k]));
      total = total.defined() ? add(total, term) : term;
    }
    return total;
  };

  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    const Tensor64 loss = loss_of(build(inputs));
    tape.backward(loss);
  }
  auto f = [&] { return loss_of(build(inputs)).item(); };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<std::size_t> all(inputs[i].size());
    std::iota(all.begin(), all.end(), 0);
    Tensor64 handle = inputs[i];
    const std::vector<double> numeric =
        central_differences(f, handle.mutable_data(), all, eps);
    const auto analytic = inputs[i].grad();
    for (std::size_t j = 0; j < all.size(); ++j) {
      acc.compare(analytic[j], numeric[j],
                  "input " + std::to_string(i) + "[" + std::to_string(j) + "]");
    }
  }
}

struct OpCase {
  std::string name;
  std::function<void(Accumulator&, Random&, double)> run;
};

ConvSpec conv_spec(std::size_t out, std::size_t kh, std::size_t kw,
                   std::size_t sh, std::size_t sw) {
  ConvSpec s;
  s.out_channels = out;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride_h = sh;
  s.stride_w = sw;
  return s;
}

// Pooling inputs are a shuffled ramp, so window maxima are unique by a
// margin far larger than eps.
Tensor64 distinct_values(Random& rng, Shape shape) {
  const std::size_t n = shape_size(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  }
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return Tensor64(std::move(shape), std::move(v));
}

// Inputs to kinked activations are kept away from zero.
Tensor64 away_from_zero(Random& rng, Shape shape) {
  Tensor64 t = rng.tensor(std::move(shape));
  for (double& v : t.mutable_data()) v = v < 0 ? v - 0.05 : v + 0.05;
  return t;
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto conv_case = [&](std::string name, ConvSpec spec, std::size_t c_in,
                       std::size_t h, std::size_t w) {
    cases.push_back({std::move(name), [=](Accumulator& a, Random& r,
                                          double eps) {
      check_op(a,
               {r.tensor({2, c_in, h, w}),
                r.tensor({spec.out_channels, c_in, spec.kernel_h,
                          spec.kernel_w}),
                r.tensor({spec.out_channels})},
               [spec](const std::vector<Tensor64>& x) {
                 return Outputs{conv2d(x[0], x[1], x[2], spec)};
               },
               r, eps);
    }});
  };
  conv_case("conv2d 3x3 stride 1", conv_spec(3, 3, 3, 1, 1), 2, 5, 4);
  conv_case("conv2d 4x4 stride 2", conv_spec(2, 4, 4, 2, 2), 2, 6, 5);
  conv_case("conv2d 2x2 stride (1,5)", conv_spec(2, 2, 2, 1, 5), 3, 4, 5);

  auto deconv_case = [&](std::string name, ConvSpec spec, std::size_t c_in,
                         Extent2 target) {
    cases.push_back({std::move(name), [=](Accumulator& a, Random& r,
                                          double eps) {
      const Extent2 in = conv_output_extent(target, spec);
      check_op(a,
               {r.tensor({2, c_in, in.height, in.width}),
                r.tensor({c_in, spec.out_channels, spec.kernel_h,
                          spec.kernel_w}),
                r.tensor({spec.out_channels})},
               [spec, target](const std::vector<Tensor64>& x) {
                 return Outputs{
                     conv_transpose2d(x[0], x[1], x[2], spec, target)};
               },
               r, eps);
    }});
  };
  deconv_case("conv_transpose2d 5x5 stride 2", conv_spec(2, 5, 5, 2, 2), 3,
              {6, 5});
  deconv_case("conv_transpose2d 4x4 stride 1", conv_spec(3, 4, 4, 1, 1), 2,
              {4, 3});
  deconv_case("conv_transpose2d 2x2 stride (1,5)", conv_spec(2, 2, 2, 1, 5), 2,
              {3, 5});

  cases.push_back({"maxpool2d (2,3)", [](Accumulator& a, Random& r,
                                         double eps) {
    check_op(a, {distinct_values(r, {2, 2, 5, 6})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{maxpool2d(x[0], 2, 3)};
             },
             r, eps);
  }});

  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    const std::string name =
        std::string("batch_norm ") + (mode == Mode::kTrain ? "train" : "eval");
    cases.push_back({name, [mode](Accumulator& a, Random& r, double eps) {
      auto state = std::make_shared<BatchNormState<double>>(
          BatchNormState<double>{r.tensor({3}, -0.5, 0.5),
                                 r.tensor({3}, 0.5, 2.0)});
      check_op(a,
               {r.tensor({4, 3, 2, 3}, -2.0, 2.0), r.tensor({3}, 0.5, 1.5),
                r.tensor({3})},
               [state, mode](const std::vector<Tensor64>& x) {
                 return Outputs{batch_norm(x[0], x[1], x[2], *state, mode)};
               },
               r, eps);
    }});
  }

  const std::pair<const char*, ActivationKind> acts[] = {
      {"leaky_relu", ActivationKind::kLeakyRelu},
      {"relu", ActivationKind::kRelu},
      {"sigmoid", ActivationKind::kSigmoid},
      {"tanh", ActivationKind::kTanh}};
  for (const auto& [name, kind] : acts) {
    const ActivationKind k = kind;
    cases.push_back({name, [k](Accumulator& a, Random& r, double eps) {
      check_op(a, {away_from_zero(r, {2, 3, 4})},
               [k](const std::vector<Tensor64>& x) {
                 return Outputs{activation(x[0], k)};
               },
               r, eps);
    }});
  }

  cases.push_back({"softmax_pair", [](Accumulator& a, Random& r, double eps) {
    check_op(a, {r.tensor({2, 5}, -2, 2), r.tensor({2, 5}, -2, 2)},
             [](const std::vector<Tensor64>& x) {
               auto [p, q] = softmax_pair(x[0], x[1]);
               return Outputs{p, q};
             },
             r, eps);
  }});
  cases.push_back({"fully_connected", [](Accumulator& a, Random& r,
                                         double eps) {
    check_op(a, {r.tensor({3, 4}), r.tensor({5, 4}), r.tensor({5})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{fully_connected(x[0], x[1], x[2])};
             },
             r, eps);
  }});
  cases.push_back({"global_avg_pool", [](Accumulator& a, Random& r,
                                         double eps) {
    check_op(a, {r.tensor({2, 3, 4, 5})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{global_avg_pool(x[0])};
             },
             r, eps);
  }});
  cases.push_back({"concat_channels", [](Accumulator& a, Random& r,
                                         double eps) {
    check_op(a, {r.tensor({2, 2, 3, 2}), r.tensor({2, 3, 3, 2})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{concat_channels<double>(x)};
             },
             r, eps);
  }});
  cases.push_back({"slice_channels", [](Accumulator& a, Random& r,
                                        double eps) {
    check_op(a, {r.tensor({2, 5, 2, 3})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{slice_channels(x[0], 1, 3)};
             },
             r, eps);
  }});
  cases.push_back({"scale_channels", [](Accumulator& a, Random& r,
                                        double eps) {
    check_op(a, {r.tensor({2, 3, 4, 2}), r.tensor({2, 3})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{scale_channels(x[0], x[1])};
             },
             r, eps);
  }});
  cases.push_back({"elementwise_mul", [](Accumulator& a, Random& r,
                                         double eps) {
    check_op(a, {r.tensor({2, 3, 4}), r.tensor({2, 3, 4})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{elementwise_mul(x[0], x[1])};
             },
             r, eps);
  }});
  cases.push_back({"add/sub", [](Accumulator& a, Random& r, double eps) {
    check_op(a, {r.tensor({3, 4}), r.tensor({3, 4})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{add(x[0], x[1]), sub(x[0], x[1])};
             },
             r, eps);
  }});
  cases.push_back({"sum", [](Accumulator& a, Random& r, double eps) {
    check_op(a, {r.tensor({3, 2, 4})},
             [](const std::vector<Tensor64>& x) { return Outputs{sum(x[0])}; },
             r, eps);
  }});
  cases.push_back({"mse_loss", [](Accumulator& a, Random& r, double eps) {
    check_op(a, {r.tensor({2, 3, 4}), r.tensor({2, 3, 4})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{mse_loss(x[0], x[1])};
             },
             r, eps);
  }});
  cases.push_back({"reshape/swap_last_axes", [](Accumulator& a, Random& r,
                                                double eps) {
    check_op(a, {r.tensor({2, 3, 4, 1})},
             [](const std::vector<Tensor64>& x) {
               return Outputs{swap_last_axes(reshape(x[0], {2, 3, 4}))};
             },
             r, eps);
  }});
  cases.push_back({"lstm", [](Accumulator& a, Random& r, double eps) {
    const std::size_t h = 3, f = 4;
    check_op(a,
             {r.tensor({2, 4, f}), r.tensor({4 * h, f}, -0.6, 0.6),
              r.tensor({4 * h, h}, -0.6, 0.6), r.tensor({4 * h}, -0.5, 0.5),
              r.tensor({2, h}, -0.5, 0.5), r.tensor({2, h}, -0.5, 0.5)},
             [](const std::vector<Tensor64>& x) {
               return Outputs{
                   lstm_forward(x[0], LstmWeights<double>{x[1], x[2], x[3]},
                                x[4], x[5])};
             },
             r, eps);
  }});
  cases.push_back({"channel_attention", [](Accumulator& a, Random& r,
                                           double eps) {
    const std::size_t c = 2;
    check_op(a,
             {r.tensor({2, c, 3, 3}), r.tensor({2, c, 3, 3}),
              r.tensor({c, 2 * c, 1, 1}), r.tensor({c}), r.tensor({c, c}),
              r.tensor({c}), r.tensor({c, c}), r.tensor({c}),
              r.tensor({c, 2 * c, 1, 1}), r.tensor({c})},
             [](const std::vector<Tensor64>& x) {
               ChannelAttentionParams<double> p{x[2], x[3], x[4], x[5],
                                                x[6], x[7], x[8], x[9]};
               auto res = channel_attention(x[0], x[1], p);
               return Outputs{res.output, res.video_weight, res.audio_weight};
             },
             r, eps);
  }});
  cases.push_back({"spectral_attention", [](Accumulator& a, Random& r,
                                            double eps) {
    const std::size_t c = 2;
    check_op(a,
             {r.tensor({1, c, 3, 3}), r.tensor({c, c, 1, 1}), r.tensor({c}),
              r.tensor({c, c, 1, 1}), r.tensor({c})},
             [](const std::vector<Tensor64>& x) {
               SpectralAttentionParams<double> p{x[1], x[2], x[3], x[4]};
               auto res = spectral_attention(x[0], p);
               return Outputs{res.output, res.mask};
             },
             r, eps);
  }});
  return cases;
}

void check_model(Accumulator& acc, FusionStrategy strategy, std::size_t d,
                 std::uint64_t seed, const GradcheckOptions& o) {
  const std::size_t per_tensor = o.entries_per_tensor;
  Random r(seed ^ 0x9c0ffee);
  MffcnModel<double> model({strategy, d}, seed);
  // Non-trivial running statistics so eval-mode batch norm is exercised.
  for (auto& [name, state] : model.batch_norm_states()) {
    for (double& v : state.running_mean.mutable_data()) v = r.uniform(-0.2, 0.2);
    for (double& v : state.running_var.mutable_data()) v = r.uniform(0.5, 2.0);
  }
  Tensor64 audio = r.tensor({1, 1, kMelBins, kSegmentFrames}, -3.0, 3.0);
  const Tensor64 video =
      r.tensor({1, kVideoFramesPerSegment, kVideoSize, kVideoSize}, 0.0, 1.0);
  const Tensor64 target = r.tensor({1, 1, kMelBins, kSegmentFrames}, -1, 1);
  audio.set_requires_grad(true);

  auto loss_value = [&] {
    return mse_loss(model.forward(audio, video, Mode::kEval), target).item();
  };
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    const Tensor64 loss =
        mse_loss(model.forward(audio, video, Mode::kEval), target);
    tape.backward(loss);
  }

  auto sample = [&](std::size_t n) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < std::min(per_tensor, n); ++k) {
      std::size_t i = r.below(n);
      while (std::find(idx.begin(), idx.end(), i) != idx.end()) i = (i + 1) % n;
      idx.push_back(i);
    }
    return idx;
  };
  auto check_tensor = [&](Tensor64 t, const std::string& name) {
    for (std::size_t i : sample(t.size())) {
      const RefinedDifference numeric = refined_central_difference(
          loss_value, t.mutable_data(), i, o.model_eps_max, o.model_eps_min,
          o.kink_agreement);
      if (!numeric.smooth) {
        ++acc.result.skipped;
        continue;
      }
      acc.compare(t.grad()[i], numeric.value,
                  std::string(strategy_name(strategy)) + " " + name + "[" +
                      std::to_string(i) + "]");
    }
  };
  for (const auto& p : model.parameters()) check_tensor(p.value, p.name);
  check_tensor(audio, "input");
}

}  // namespace

bool GradcheckReport::all_passed() const {
  return !results.empty() &&
         std::all_of(results.begin(), results.end(),
                     [](const GradcheckResult& r) { return r.passed; });
}

const GradcheckResult& GradcheckReport::worst() const {
  if (results.empty()) throw ConfigError("gradcheck report is empty");
  return *std::max_element(results.begin(), results.end(),
                           [](const GradcheckResult& a,
                              const GradcheckResult& b) {
                             return a.max_relative_error <
                                    b.max_relative_error;
                           });
}

GradcheckReport run_gradcheck_suite(const GradcheckOptions& o,
                                    const GradcheckProgress& progress) {
  if (!(o.tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  if (o.seeds == 0) throw ConfigError("gradcheck needs at least one seed");
  validate_width_divisor(o.width_divisor);
  GradcheckReport report;
  report.tolerance = o.tolerance;
  auto finish = [&](Accumulator& acc) {
    // A gate with tolerance 0 must fail even on a perfect match.
    const std::size_t seen = acc.result.entries + acc.result.skipped;
    acc.result.passed =
        acc.result.max_relative_error < o.tolerance &&
        acc.result.entries > 0 &&
        static_cast<double>(acc.result.skipped) <=
            o.max_skipped_fraction * static_cast<double>(seen);
    report.results.push_back(acc.result);
    if (progress) progress(acc.result);
  };

  for (const OpCase& c : op_cases()) {
    Accumulator acc;
    acc.result.name = c.name;
    for (std::size_t s = 0; s < o.seeds; ++s) {
      Random rng(o.seed + s);
      c.run(acc, rng, o.op_eps);
      ++acc.result.runs;
    }
    finish(acc);
  }

  if (o.end_to_end) {
    for (std::size_t i = 0; i < o.strategies.size(); ++i) {
      Accumulator acc;
      acc.result.name = "end-to-end " +
                        std::string(strategy_name(o.strategies[i])) +
                        " (width /" + std::to_string(o.width_divisor) + ")";
      const std::size_t runs = i == 0 ? o.seeds : 1;
      for (std::size_t s = 0; s < runs; ++s) {
        check_model(acc, o.strategies[i], o.width_divisor, o.seed + s, o);
        ++acc.result.runs;
      }
      finish(acc);
    }
  }
  return report;
}

void print_gradcheck_table(std::ostream& out, const GradcheckReport& report) {
  std::size_t w = 2;
  for (const auto& r : report.results) w = std::max(w, r.name.size());
  out << std::left << std::setw(static_cast<int>(w)) << "op"
      << "  max rel-err  entries  skipped  seeds  result\n";
  for (const auto& r : report.results) {
    out << std::left << std::setw(static_cast<int>(w)) << r.name << "  "
        << std::right << std::setw(11) << std::scientific
        << std::setprecision(3) << r.max_relative_error << "  " << std::setw(7)
        << r.entries << "  " << std::setw(7) << r.skipped << "  "
        << std::setw(5) << r.runs << "  "
        << (r.passed ? "PASS" : "FAIL") << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << "tolerance " << report.tolerance << ": "
      << (report.all_passed() ? "all passed" : "FAILED") << '\n';
}

}  // namespace mffcn
