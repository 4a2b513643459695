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

#ifndef MFFCN_MODEL_HPP_
#define MFFCN_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mffcn/lstm.hpp"
#include "mffcn/ops.hpp"
#include "mffcn/tensor.hpp"

// The encoder-bottleneck-decoder network: twin audio/video encoders with an
// attention fusion block per layer, an attention + stacked-LSTM bottleneck
// and a deconvolution decoder that mirrors the audio encoder.
//
// Feature maps are batched: audio [B,1,80,20], video [B,5,80,80], output
// [B,1,80,20]. Layers are numbered 1..10 throughout (parameter names, traces,
// fusion indices).

namespace mffcn {

enum class FusionStrategy {
  kEarlyFusion,
  kLateFusion,
  kIntermediateBottleneck,
  kIntermediateDecoder,
  kMultiLayer,
};

inline constexpr std::array<FusionStrategy, 5> kAllStrategies = {
    FusionStrategy::kEarlyFusion, FusionStrategy::kLateFusion,
    FusionStrategy::kIntermediateBottleneck,
    FusionStrategy::kIntermediateDecoder, FusionStrategy::kMultiLayer};

// CLI spelling: early, late, mid-bottleneck, mid-decoder, multilayer.
std::string_view strategy_name(FusionStrategy strategy);
// Human-readable row label for reports.
std::string_view strategy_label(FusionStrategy strategy);
FusionStrategy parse_strategy(std::string_view name);

inline constexpr std::size_t kEncoderLayers = 10;

struct EncoderLayerSpec {
  std::size_t channels;  // at width divisor 1
  std::size_t kernel_h, kernel_w;
  std::size_t audio_stride_h, audio_stride_w;
  std::size_t video_pool_h, video_pool_w;
};

// Row i describes layer i + 1.
const std::array<EncoderLayerSpec, kEncoderLayers>& encoder_schedule();

// Divisors 1, 2, 4, ..., 64 keep every layer at least one channel wide.
void validate_width_divisor(std::size_t width_divisor);
// Channel count of encoder layer `layer` (1..10); layer 0 is the audio input.
std::size_t layer_channels(std::size_t layer, std::size_t width_divisor);
ConvSpec audio_conv_spec(std::size_t layer, std::size_t width_divisor);
ConvSpec video_conv_spec(std::size_t layer, std::size_t width_divisor);

struct LayerShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
  std::string to_string() const;
};

// Expected per-layer shapes derived from the schedule. Entry 0 is the branch
// input, entry i the output of layer i.
std::vector<LayerShape> audio_trace(std::size_t width_divisor);
std::vector<LayerShape> video_trace(std::size_t width_divisor);

// ---------------------------------------------------------------------------
// Building blocks. Parameter bundles hold tensor handles, so copies share
// storage with the owning model.

template <typename T>
struct ConvLayerParams {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BatchNormState<T> bn;
};

template <typename T>
struct ChannelAttentionParams {
  BasicTensor<T> reduce_weight, reduce_bias;  // 1x1, 2C -> C
  BasicTensor<T> fc1_weight, fc1_bias;        // C -> C
  BasicTensor<T> fc2_weight, fc2_bias;        // C -> C
  BasicTensor<T> merge_weight, merge_bias;    // 1x1, 2C -> C
};

template <typename T>
struct SpectralAttentionParams {
  BasicTensor<T> conv1_weight, conv1_bias;  // 1x1, C -> C
  BasicTensor<T> conv2_weight, conv2_bias;  // 1x1, C -> C
};

template <typename T>
struct ChannelAttentionResult {
  BasicTensor<T> output;   // N
  BasicTensor<T> video_weight;  // w_V, [B,C]
  BasicTensor<T> audio_weight;  // w_A, [B,C]
};

template <typename T>
struct SpectralAttentionResult {
  BasicTensor<T> output;  // N * mask
  BasicTensor<T> mask;    // in (0, 1)
};

// M = reduce(concat(V, A)); g = avgpool(M); (w_V, w_A) = softmax(FC1 g, FC2 g);
// N = merge(concat(V w_V, A w_A)).
template <typename T>
ChannelAttentionResult<T> channel_attention(
    const BasicTensor<T>& video, const BasicTensor<T>& audio,
    const ChannelAttentionParams<T>& params);

// mask = sigmoid(conv2(relu(conv1(N)))); output = N * mask.
template <typename T>
SpectralAttentionResult<T> spectral_attention(
    const BasicTensor<T>& features, const SpectralAttentionParams<T>& params);

// Audio: strided conv -> batch norm -> leaky ReLU.
// Video: stride-1 conv -> max pool -> batch norm -> leaky ReLU.
// The input must match the trace entry for the layer.
template <typename T>
BasicTensor<T> encoder_layer_audio(const BasicTensor<T>& x, std::size_t layer,
                                   std::size_t width_divisor,
                                   ConvLayerParams<T>& params, Mode mode);
template <typename T>
BasicTensor<T> encoder_layer_video(const BasicTensor<T>& x, std::size_t layer,
                                   std::size_t width_divisor,
                                   ConvLayerParams<T>& params, Mode mode);

// ---------------------------------------------------------------------------

struct ModelConfig {
  FusionStrategy strategy = FusionStrategy::kMultiLayer;
  std::size_t width_divisor = 1;
};

// Optional instrumentation filled by a forward pass.
template <typename T>
struct ForwardTrace {
  std::vector<Shape> audio;    // per encoder layer output
  std::vector<Shape> video;
  std::vector<Shape> decoder;  // per decoder layer output
  std::vector<BasicTensor<T>> channel_weight_sums;  // w_V + w_A per block
  std::vector<BasicTensor<T>> spectral_masks;
};

template <typename T>
struct NamedParameter {
  std::string name;
  BasicTensor<T> value;
};

template <typename T>
class MffcnModel {
 public:
  using Parameter = NamedParameter<T>;

  // Registers every parameter of the strategy's topology and initialises
  // weights ~ U(+-sqrt(6 / fan_in)), biases 0, gamma 1, beta 0 and LSTM
  // forget-gate biases 1 from a single mt19937_64 stream.
  MffcnModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Trainable tensors in registration order.
  const std::vector<Parameter>& parameters() const { return params_; }
  // Batch-norm running statistics: name -> state, names "<prefix>.bn".
  const std::map<std::string, BatchNormState<T>>& batch_norm_states() const {
    return bn_;
  }
  std::map<std::string, BatchNormState<T>>& batch_norm_states() { return bn_; }

  const BasicTensor<T>& param(const std::string& name) const;
  bool has_param(const std::string& name) const;
  std::size_t parameter_count() const;  // scalar trainable entries
  std::size_t fusion_block_count() const;

  // audio [B,1,80,20] (or [1,80,20]), video [B,5,80,80] (or [5,80,80]).
  // Output has the audio input's shape.
  BasicTensor<T> forward(const BasicTensor<T>& audio,
                         const BasicTensor<T>& video, Mode mode,
                         ForwardTrace<T>* trace = nullptr);

  void zero_grad();

 private:
  enum class Init { kUniform, kZero, kOne };

  BasicTensor<T>& add_param(const std::string& name, Shape shape, Init init,
                            std::size_t fan_in = 0);
  void register_conv(const std::string& prefix, std::size_t c_in,
                     std::size_t c_out, std::size_t kh, std::size_t kw);
  void register_batch_norm(const std::string& prefix, std::size_t channels);
  void register_fusion(std::size_t index, std::size_t channels);
  void register_spectral(const std::string& prefix, std::size_t channels);
  void register_lstm(const std::string& prefix, std::size_t features,
                     std::size_t hidden);

  ConvLayerParams<T> conv_layer(const std::string& prefix);
  ChannelAttentionParams<T> channel_params(const std::string& prefix) const;
  SpectralAttentionParams<T> spectral_params(const std::string& prefix) const;
  LstmWeights<T> lstm_params(const std::string& prefix) const;

  using FeatureList =
      std::array<std::optional<BasicTensor<T>>, kEncoderLayers + 1>;

  BasicTensor<T> fuse(std::size_t index, const BasicTensor<T>& video,
                      const BasicTensor<T>& audio, ForwardTrace<T>* trace);
  BasicTensor<T> bottleneck(const BasicTensor<T>& x, ForwardTrace<T>* trace);
  BasicTensor<T> decoder(BasicTensor<T> x, const FeatureList& skips,
                         const FeatureList& video_features, Mode mode,
                         ForwardTrace<T>* trace);

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, BatchNormState<T>> bn_;
  std::size_t fusion_blocks_ = 0;
  std::mt19937_64 rng_;  // initialisation stream
};

extern template class MffcnModel<float>;
extern template class MffcnModel<double>;

// Encoder-only pass used by `trace-shapes`: runs both branches through all
// ten layers with freshly initialised weights and returns the observed
// output shapes (index 0 = input).
struct EncoderTraceReport {
  std::vector<LayerShape> audio;
  std::vector<LayerShape> video;
};
EncoderTraceReport run_encoder_trace(std::size_t width_divisor,
                                     std::uint64_t seed);

}  // namespace mffcn

#endif  // MFFCN_MODEL_HPP_
