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

#include "mffcn/model.hpp"

#include <cmath>
#include <numeric>

#include "mffcn/dsp.hpp"
#include "mffcn/errors.hpp"

namespace mffcn {

namespace {

constexpr std::array<EncoderLayerSpec, kEncoderLayers> kSchedule = {{
    {64, 5, 5, 2, 2, 2, 4},
    {64, 4, 4, 1, 1, 1, 2},
    {128, 4, 4, 2, 2, 2, 2},
    {128, 4, 4, 1, 1, 1, 1},
    {256, 2, 2, 2, 1, 2, 1},
    {256, 2, 2, 1, 1, 1, 1},
    {512, 2, 2, 2, 1, 2, 1},
    {512, 2, 2, 1, 1, 1, 1},
    {1024, 2, 2, 1, 5, 1, 5},
    {1024, 2, 2, 1, 1, 1, 1},
}};

const EncoderLayerSpec& row(std::size_t layer) {
  if (layer < 1 || layer > kEncoderLayers) {
    throw ConfigError("encoder layer index must be in [1, 10], got " +
                      std::to_string(layer));
  }
  return kSchedule[layer - 1];
}

std::string layer_name(const char* branch, std::size_t layer) {
  return std::string(branch) + "." + std::to_string(layer);
}

// [B,C,H,W] -> (C,H,W)
LayerShape feature_shape(const Shape& s) {
  return {s.at(1), s.at(2), s.at(3)};
}

template <typename T>
void require_trace(const BasicTensor<T>& x, const LayerShape& want,
                   const std::string& where) {
  if (x.rank() != 4 || feature_shape(x.shape()) != want) {
    throw ShapeError(where + ": input " + shape_string(x.shape()) +
                     " violates the layer trace, expected [B," +
                     std::to_string(want.channels) + "," +
                     std::to_string(want.height) + "," +
                     std::to_string(want.width) + "]");
  }
}

template <typename T>
BasicTensor<T> conv1x1(const BasicTensor<T>& x, const BasicTensor<T>& w,
                       const BasicTensor<T>& b) {
  ConvSpec spec;
  spec.out_channels = w.dim(0);
  return conv2d(x, w, b, spec);
}

// Layer 1 is the one place where the branches disagree spatially: the video
// map is (C,40,20) against the audio's (C,40,10). The video side is brought
// to the audio extent with a parameter-free max pool of the integer ratio
// (exactly what the next video layer applies anyway).
template <typename T>
BasicTensor<T> align_to(const BasicTensor<T>& video, const Shape& audio) {
  const Shape& v = video.shape();
  if (v == audio) return video;
  if (v.size() == 4 && audio.size() == 4 && v[0] == audio[0] &&
      v[1] == audio[1] && v[2] % audio[2] == 0 && v[3] % audio[3] == 0) {
    return maxpool2d(video, v[2] / audio[2], v[3] / audio[3]);
  }
  throw ShapeError("fusion: video features " + shape_string(v) +
                   " cannot be aligned to audio features " +
                   shape_string(audio));
}

// Uniform in [0, 1) from the top 53 bits: identical on every standard
// library, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string_view strategy_name(FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::kEarlyFusion: return "early";
    case FusionStrategy::kLateFusion: return "late";
    case FusionStrategy::kIntermediateBottleneck: return "mid-bottleneck";
    case FusionStrategy::kIntermediateDecoder: return "mid-decoder";
    case FusionStrategy::kMultiLayer: return "multilayer";
  }
  return "?";
}

std::string_view strategy_label(FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::kEarlyFusion: return "Early Fusion";
    case FusionStrategy::kLateFusion: return "Late Fusion";
    case FusionStrategy::kIntermediateBottleneck:
      return "Intermediate Fusion (bottleneck)";
    case FusionStrategy::kIntermediateDecoder:
      return "Intermediate Fusion (decoder)";
    case FusionStrategy::kMultiLayer: return "Multi-layer Feature Fusion";
  }
  return "?";
}

FusionStrategy parse_strategy(std::string_view name) {
  for (FusionStrategy s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected early, late, mid-bottleneck, mid-decoder or "
                    "multilayer)");
}

const std::array<EncoderLayerSpec, kEncoderLayers>& encoder_schedule() {
  return kSchedule;
}

void validate_width_divisor(std::size_t d) {
  if (d == 0 || d > 64 || (d & (d - 1)) != 0) {
    throw ConfigError("width divisor must be one of 1, 2, 4, 8, 16, 32, 64; "
                      "got " + std::to_string(d));
  }
}

std::size_t layer_channels(std::size_t layer, std::size_t d) {
  validate_width_divisor(d);
  if (layer == 0) return 1;
  return row(layer).channels / d;
}

ConvSpec audio_conv_spec(std::size_t layer, std::size_t d) {
  const EncoderLayerSpec& r = row(layer);
  ConvSpec spec;
  spec.out_channels = layer_channels(layer, d);
  spec.kernel_h = r.kernel_h;
  spec.kernel_w = r.kernel_w;
  spec.stride_h = r.audio_stride_h;
  spec.stride_w = r.audio_stride_w;
  return spec;
}

ConvSpec video_conv_spec(std::size_t layer, std::size_t d) {
  ConvSpec spec = audio_conv_spec(layer, d);
  spec.stride_h = 1;
  spec.stride_w = 1;
  return spec;
}

std::string LayerShape::to_string() const {
  return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
         std::to_string(width) + ")";
}

std::vector<LayerShape> audio_trace(std::size_t d) {
  validate_width_divisor(d);
  std::vector<LayerShape> trace{{1, kMelBins, kSegmentFrames}};
  for (std::size_t layer = 1; layer <= kEncoderLayers; ++layer) {
    const EncoderLayerSpec& r = row(layer);
    const LayerShape& prev = trace.back();
    trace.push_back({layer_channels(layer, d),
                     same_ceil_extent(prev.height, r.audio_stride_h),
                     same_ceil_extent(prev.width, r.audio_stride_w)});
  }
  return trace;
}

std::vector<LayerShape> video_trace(std::size_t d) {
  validate_width_divisor(d);
  std::vector<LayerShape> trace{
      {kVideoFramesPerSegment, kVideoSize, kVideoSize}};
  for (std::size_t layer = 1; layer <= kEncoderLayers; ++layer) {
    const EncoderLayerSpec& r = row(layer);
    const LayerShape& prev = trace.back();
    trace.push_back({layer_channels(layer, d),
                     same_ceil_extent(prev.height, r.video_pool_h),
                     same_ceil_extent(prev.width, r.video_pool_w)});
  }
  return trace;
}

// ---------------------------------------------------------------------------

template <typename T>
ChannelAttentionResult<T> channel_attention(
    const BasicTensor<T>& video, const BasicTensor<T>& audio,
    const ChannelAttentionParams<T>& p) {
  if (video.shape() != audio.shape()) {
    throw ShapeError("channel_attention: modality shapes differ, video " +
                     shape_string(video.shape()) + " vs audio " +
                     shape_string(audio.shape()));
  }
  const BasicTensor<T> both[] = {video, audio};
  const BasicTensor<T> m =
      conv1x1(concat_channels<T>(both), p.reduce_weight, p.reduce_bias);
  const BasicTensor<T> g = global_avg_pool(m);
  auto [w_v, w_a] = softmax_pair(fully_connected(g, p.fc1_weight, p.fc1_bias),
                                 fully_connected(g, p.fc2_weight, p.fc2_bias));
  const BasicTensor<T> weighted[] = {scale_channels(video, w_v),
                                     scale_channels(audio, w_a)};
  BasicTensor<T> n =
      conv1x1(concat_channels<T>(weighted), p.merge_weight, p.merge_bias);
  return {std::move(n), std::move(w_v), std::move(w_a)};
}

template <typename T>
SpectralAttentionResult<T> spectral_attention(
    const BasicTensor<T>& features, const SpectralAttentionParams<T>& p) {
  const BasicTensor<T> hidden =
      relu(conv1x1(features, p.conv1_weight, p.conv1_bias));
  BasicTensor<T> mask = sigmoid(conv1x1(hidden, p.conv2_weight, p.conv2_bias));
  BasicTensor<T> out = elementwise_mul(features, mask);
  return {std::move(out), std::move(mask)};
}

template <typename T>
BasicTensor<T> encoder_layer_audio(const BasicTensor<T>& x, std::size_t layer,
                                   std::size_t d, ConvLayerParams<T>& p,
                                   Mode mode) {
  require_trace(x, audio_trace(d).at(layer - 1),
                layer_name("audio encoder layer", layer));
  BasicTensor<T> y = conv2d(x, p.weight, p.bias, audio_conv_spec(layer, d));
  y = batch_norm(y, p.gamma, p.beta, p.bn, mode);
  return leaky_relu(y);
}

template <typename T>
BasicTensor<T> encoder_layer_video(const BasicTensor<T>& x, std::size_t layer,
                                   std::size_t d, ConvLayerParams<T>& p,
                                   Mode mode) {
  require_trace(x, video_trace(d).at(layer - 1),
                layer_name("video encoder layer", layer));
  const EncoderLayerSpec& r = row(layer);
  BasicTensor<T> y = conv2d(x, p.weight, p.bias, video_conv_spec(layer, d));
  y = maxpool2d(y, r.video_pool_h, r.video_pool_w);
  y = batch_norm(y, p.gamma, p.beta, p.bn, mode);
  return leaky_relu(y);
}

// ---------------------------------------------------------------------------

template <typename T>
MffcnModel<T>::MffcnModel(ModelConfig config, std::uint64_t seed)
    : config_(config), rng_(seed) {
  const std::size_t d = config.width_divisor;
  validate_width_divisor(d);
  const FusionStrategy s = config.strategy;

  for (std::size_t k = 1; k <= kEncoderLayers; ++k) {
    const std::string prefix = layer_name("audio_enc", k);
    const EncoderLayerSpec& r = row(k);
    register_conv(prefix + ".conv", layer_channels(k - 1, d),
                  layer_channels(k, d), r.kernel_h, r.kernel_w);
    register_batch_norm(prefix + ".bn", layer_channels(k, d));
  }
  const std::size_t video_layers =
      s == FusionStrategy::kEarlyFusion ? 1 : kEncoderLayers;
  for (std::size_t k = 1; k <= video_layers; ++k) {
    const std::string prefix = layer_name("video_enc", k);
    const EncoderLayerSpec& r = row(k);
    const std::size_t c_in = k == 1 ? kVideoFramesPerSegment : layer_channels(k - 1, d);
    register_conv(prefix + ".conv", c_in, layer_channels(k, d), r.kernel_h,
                  r.kernel_w);
    register_batch_norm(prefix + ".bn", layer_channels(k, d));
  }

  switch (s) {
    case FusionStrategy::kEarlyFusion:
      register_fusion(1, layer_channels(1, d));
      break;
    case FusionStrategy::kLateFusion:
    case FusionStrategy::kIntermediateBottleneck:
      register_fusion(kEncoderLayers, layer_channels(kEncoderLayers, d));
      break;
    case FusionStrategy::kIntermediateDecoder:
    case FusionStrategy::kMultiLayer:
      for (std::size_t k = 1; k <= kEncoderLayers; ++k) {
        register_fusion(k, layer_channels(k, d));
      }
      break;
  }

  const std::size_t c10 = layer_channels(kEncoderLayers, d);
  register_spectral("bottleneck.sa", c10);
  register_lstm("bottleneck.lstm.0", c10, c10);
  register_lstm("bottleneck.lstm.1", c10, c10);

  const bool skips = s != FusionStrategy::kLateFusion;
  for (std::size_t j = 1; j <= kEncoderLayers; ++j) {
    const std::size_t k = kEncoderLayers + 1 - j;
    const std::string prefix = layer_name("decoder", j);
    const EncoderLayerSpec& r = row(k);
    const std::size_t c_k = layer_channels(k, d);
    if (skips) register_conv(prefix + ".skip", 2 * c_k, c_k, 1, 1);
    // Transposed-conv weights are [C_in, C_out, kh, kw].
    const std::size_t c_out = layer_channels(k - 1, d);
    add_param(prefix + ".deconv.weight", {c_k, c_out, r.kernel_h, r.kernel_w},
              Init::kUniform, c_k * r.kernel_h * r.kernel_w);
    add_param(prefix + ".deconv.bias", {c_out}, Init::kZero);
    if (j < kEncoderLayers) register_batch_norm(prefix + ".bn", c_out);
  }
}

template <typename T>
BasicTensor<T>& MffcnModel<T>::add_param(const std::string& name, Shape shape,
                                         Init init, std::size_t fan_in) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  std::vector<T> values(shape_size(shape));
  switch (init) {
    case Init::kZero: break;
    case Init::kOne: std::fill(values.begin(), values.end(), T(1)); break;
    case Init::kUniform: {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (T& v : values) {
        v = static_cast<T>((2.0 * unit_uniform(rng_) - 1.0) * bound);
      }
      break;
    }
  }
  index_[name] = params_.size();
  params_.push_back({name, BasicTensor<T>(std::move(shape), std::move(values))});
  params_.back().value.set_requires_grad(true);
  return params_.back().value;
}

template <typename T>
void MffcnModel<T>::register_conv(const std::string& prefix, std::size_t c_in,
                                  std::size_t c_out, std::size_t kh,
                                  std::size_t kw) {
  add_param(prefix + ".weight", {c_out, c_in, kh, kw}, Init::kUniform,
            c_in * kh * kw);
  add_param(prefix + ".bias", {c_out}, Init::kZero);
}

template <typename T>
void MffcnModel<T>::register_batch_norm(const std::string& prefix,
                                        std::size_t channels) {
  add_param(prefix + ".gamma", {channels}, Init::kOne);
  add_param(prefix + ".beta", {channels}, Init::kZero);
  bn_.emplace(prefix, BatchNormState<T>::fresh(channels));
}

template <typename T>
void MffcnModel<T>::register_fusion(std::size_t index, std::size_t c) {
  const std::string prefix = layer_name("fusion", index);
  register_conv(prefix + ".ca.reduce", 2 * c, c, 1, 1);
  add_param(prefix + ".ca.fc1.weight", {c, c}, Init::kUniform, c);
  add_param(prefix + ".ca.fc1.bias", {c}, Init::kZero);
  add_param(prefix + ".ca.fc2.weight", {c, c}, Init::kUniform, c);
  add_param(prefix + ".ca.fc2.bias", {c}, Init::kZero);
  register_conv(prefix + ".ca.merge", 2 * c, c, 1, 1);
  register_spectral(prefix + ".sa", c);
  ++fusion_blocks_;
}

template <typename T>
void MffcnModel<T>::register_spectral(const std::string& prefix,
                                      std::size_t c) {
  register_conv(prefix + ".conv1", c, c, 1, 1);
  register_conv(prefix + ".conv2", c, c, 1, 1);
}

template <typename T>
void MffcnModel<T>::register_lstm(const std::string& prefix,
                                  std::size_t features, std::size_t hidden) {
  add_param(prefix + ".w_ih", {4 * hidden, features}, Init::kUniform,
            features);
  add_param(prefix + ".w_hh", {4 * hidden, hidden}, Init::kUniform, hidden);
  BasicTensor<T>& bias = add_param(prefix + ".bias", {4 * hidden}, Init::kZero);
  auto b = bias.mutable_data();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden), T(1));
}

template <typename T>
const BasicTensor<T>& MffcnModel<T>::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("model (" + std::string(strategy_name(config_.strategy)) +
                      ") has no parameter " + name);
  }
  return params_[it->second].value;
}

template <typename T>
bool MffcnModel<T>::has_param(const std::string& name) const {
  return index_.count(name) != 0;
}

template <typename T>
std::size_t MffcnModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::size_t MffcnModel<T>::fusion_block_count() const {
  return fusion_blocks_;
}

template <typename T>
void MffcnModel<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
ConvLayerParams<T> MffcnModel<T>::conv_layer(const std::string& prefix) {
  return {param(prefix + ".conv.weight"), param(prefix + ".conv.bias"),
          param(prefix + ".bn.gamma"), param(prefix + ".bn.beta"),
          bn_.at(prefix + ".bn")};
}

template <typename T>
ChannelAttentionParams<T> MffcnModel<T>::channel_params(
    const std::string& prefix) const {
  return {param(prefix + ".reduce.weight"), param(prefix + ".reduce.bias"),
          param(prefix + ".fc1.weight"),    param(prefix + ".fc1.bias"),
          param(prefix + ".fc2.weight"),    param(prefix + ".fc2.bias"),
          param(prefix + ".merge.weight"),  param(prefix + ".merge.bias")};
}

template <typename T>
SpectralAttentionParams<T> MffcnModel<T>::spectral_params(
    const std::string& prefix) const {
  return {param(prefix + ".conv1.weight"), param(prefix + ".conv1.bias"),
          param(prefix + ".conv2.weight"), param(prefix + ".conv2.bias")};
}

template <typename T>
LstmWeights<T> MffcnModel<T>::lstm_params(const std::string& prefix) const {
  return {param(prefix + ".w_ih"), param(prefix + ".w_hh"),
          param(prefix + ".bias")};
}

template <typename T>
BasicTensor<T> MffcnModel<T>::fuse(std::size_t index,
                                   const BasicTensor<T>& video,
                                   const BasicTensor<T>& audio,
                                   ForwardTrace<T>* trace) {
  const std::string prefix = layer_name("fusion", index);
  ChannelAttentionResult<T> ca = channel_attention(
      align_to(video, audio.shape()), audio, channel_params(prefix + ".ca"));
  SpectralAttentionResult<T> sa =
      spectral_attention(ca.output, spectral_params(prefix + ".sa"));
  if (trace) {
    std::vector<T> sums(ca.video_weight.size());
    for (std::size_t i = 0; i < sums.size(); ++i) {
      sums[i] = ca.video_weight.at(i) + ca.audio_weight.at(i);
    }
    trace->channel_weight_sums.emplace_back(ca.video_weight.shape(),
                                            std::move(sums));
    trace->spectral_masks.push_back(sa.mask);
  }
  return sa.output;
}

template <typename T>
BasicTensor<T> MffcnModel<T>::bottleneck(const BasicTensor<T>& x,
                                         ForwardTrace<T>* trace) {
  const LayerShape want = audio_trace(config_.width_divisor).back();
  require_trace(x, want, "bottleneck");
  SpectralAttentionResult<T> sa =
      spectral_attention(x, spectral_params("bottleneck.sa"));
  if (trace) trace->spectral_masks.push_back(sa.mask);
  const std::size_t b = x.dim(0), c = want.channels, steps = want.height;
  // [B,C,5,1] -> [B,5,C]: the frequency axis is the sequence.
  BasicTensor<T> seq = swap_last_axes(reshape(sa.output, {b, c, steps}));
  const BasicTensor<T> zeros = BasicTensor<T>::zeros({b, c});
  seq = lstm_forward(seq, lstm_params("bottleneck.lstm.0"), zeros, zeros);
  seq = lstm_forward(seq, lstm_params("bottleneck.lstm.1"), zeros, zeros);
  return reshape(swap_last_axes(seq), {b, c, steps, want.width});
}

template <typename T>
BasicTensor<T> MffcnModel<T>::decoder(BasicTensor<T> x,
                                      const FeatureList& skips,
                                      const FeatureList& video_features,
                                      Mode mode, ForwardTrace<T>* trace) {
  const std::size_t d = config_.width_divisor;
  const std::vector<LayerShape> shapes = audio_trace(d);
  for (std::size_t j = 1; j <= kEncoderLayers; ++j) {
    const std::size_t k = kEncoderLayers + 1 - j;
    const std::string prefix = layer_name("decoder", j);
    require_trace(x, shapes[k], prefix);
    if (video_features[k]) x = fuse(k, *video_features[k], x, trace);
    if (skips[k]) {
      if (skips[k]->shape() != x.shape()) {
        throw ShapeError(prefix + ": skip " + shape_string(skips[k]->shape()) +
                         " does not match " + shape_string(x.shape()));
      }
      const BasicTensor<T> both[] = {x, *skips[k]};
      x = conv1x1(concat_channels<T>(both), param(prefix + ".skip.weight"),
                  param(prefix + ".skip.bias"));
    }
    ConvSpec spec = audio_conv_spec(k, d);
    spec.out_channels = shapes[k - 1].channels;
    x = conv_transpose2d(x, param(prefix + ".deconv.weight"),
                         param(prefix + ".deconv.bias"), spec,
                         Extent2{shapes[k - 1].height, shapes[k - 1].width});
    if (j < kEncoderLayers) {
      x = batch_norm(x, param(prefix + ".bn.gamma"), param(prefix + ".bn.beta"),
                     bn_.at(prefix + ".bn"), mode);
      x = leaky_relu(x);
    }
    if (trace) trace->decoder.push_back(x.shape());
  }
  return x;
}

template <typename T>
BasicTensor<T> MffcnModel<T>::forward(const BasicTensor<T>& audio_in,
                                      const BasicTensor<T>& video_in,
                                      Mode mode, ForwardTrace<T>* trace) {
  const std::size_t d = config_.width_divisor;
  const bool unbatched = audio_in.rank() == 3;
  if (unbatched != (video_in.rank() == 3)) {
    throw ShapeError("forward: audio " + shape_string(audio_in.shape()) +
                     " and video " + shape_string(video_in.shape()) +
                     " must both be batched or both unbatched");
  }
  BasicTensor<T> audio = audio_in, video = video_in;
  if (unbatched) {
    Shape a = audio.shape(), v = video.shape();
    a.insert(a.begin(), 1);
    v.insert(v.begin(), 1);
    audio = reshape(audio, a);
    video = reshape(video, v);
  }
  if (audio.rank() != 4 || video.rank() != 4 || audio.dim(0) != video.dim(0)) {
    throw ShapeError("forward: expected audio [B,1,80,20] and video "
                     "[B,5,80,80], got " + shape_string(audio.shape()) +
                     " and " + shape_string(video.shape()));
  }

  FeatureList a{}, v{}, skips{}, video_skips{};
  const FusionStrategy s = config_.strategy;
  BasicTensor<T> x = audio;
  BasicTensor<T> y = video;
  BasicTensor<T> bottleneck_in;

  auto note = [&](const BasicTensor<T>& t, std::vector<Shape> ForwardTrace<T>::*
                                               list) {
    if (trace) (trace->*list).push_back(t.shape());
  };

  if (s == FusionStrategy::kEarlyFusion) {
    ConvLayerParams<T> ap = conv_layer("audio_enc.1");
    x = encoder_layer_audio(x, 1, d, ap, mode);
    note(x, &ForwardTrace<T>::audio);
    ConvLayerParams<T> vp = conv_layer("video_enc.1");
    y = encoder_layer_video(y, 1, d, vp, mode);
    note(y, &ForwardTrace<T>::video);
    x = fuse(1, y, x, trace);
    skips[1] = x;
    for (std::size_t k = 2; k <= kEncoderLayers; ++k) {
      ConvLayerParams<T> p = conv_layer(layer_name("audio_enc", k));
      x = encoder_layer_audio(x, k, d, p, mode);
      note(x, &ForwardTrace<T>::audio);
      skips[k] = x;
    }
    bottleneck_in = x;
  } else {
    for (std::size_t k = 1; k <= kEncoderLayers; ++k) {
      ConvLayerParams<T> ap = conv_layer(layer_name("audio_enc", k));
      ConvLayerParams<T> vp = conv_layer(layer_name("video_enc", k));
      x = encoder_layer_audio(x, k, d, ap, mode);
      y = encoder_layer_video(y, k, d, vp, mode);
      note(x, &ForwardTrace<T>::audio);
      note(y, &ForwardTrace<T>::video);
      a[k] = x;
      v[k] = y;
      // Branches continue on their own features; fused maps only feed the
      // decoder.
      if (s == FusionStrategy::kMultiLayer) skips[k] = fuse(k, y, x, trace);
    }
    switch (s) {
      case FusionStrategy::kMultiLayer:
        bottleneck_in = *skips[kEncoderLayers];
        break;
      case FusionStrategy::kLateFusion:
        bottleneck_in = fuse(kEncoderLayers, y, x, trace);
        break;
      case FusionStrategy::kIntermediateBottleneck:
        bottleneck_in = fuse(kEncoderLayers, y, x, trace);
        skips = a;
        break;
      case FusionStrategy::kIntermediateDecoder:
        bottleneck_in = x;
        skips = a;
        video_skips = v;
        break;
      case FusionStrategy::kEarlyFusion:
        break;
    }
  }

  BasicTensor<T> out = decoder(bottleneck(bottleneck_in, trace), skips,
                               video_skips, mode, trace);
  if (unbatched) out = reshape(out, audio_in.shape());
  return out;
}

template class MffcnModel<float>;
template class MffcnModel<double>;

#define MFFCN_INSTANTIATE_MODEL(T)                                            \
  template ChannelAttentionResult<T> channel_attention(                       \
      const BasicTensor<T>&, const BasicTensor<T>&,                           \
      const ChannelAttentionParams<T>&);                                      \
  template SpectralAttentionResult<T> spectral_attention(                     \
      const BasicTensor<T>&, const SpectralAttentionParams<T>&);              \
  template BasicTensor<T> encoder_layer_audio(                                \
      const BasicTensor<T>&, std::size_t, std::size_t, ConvLayerParams<T>&,   \
      Mode);                                                                  \
  template BasicTensor<T> encoder_layer_video(                                \
      const BasicTensor<T>&, std::size_t, std::size_t, ConvLayerParams<T>&,   \
      Mode);

MFFCN_INSTANTIATE_MODEL(float)
MFFCN_INSTANTIATE_MODEL(double)

// ---------------------------------------------------------------------------

EncoderTraceReport run_encoder_trace(std::size_t d, std::uint64_t seed) {
  validate_width_divisor(d);
  std::mt19937_64 rng(seed);
  auto random_tensor = [&](Shape shape, double bound) {
    std::vector<float> values(shape_size(shape));
    for (float& v : values) {
      v = static_cast<float>((2.0 * unit_uniform(rng) - 1.0) * bound);
    }
    return Tensor(std::move(shape), std::move(values));
  };
  auto make_layer = [&](std::size_t c_in, std::size_t layer) {
    const EncoderLayerSpec& r = row(layer);
    const std::size_t c_out = layer_channels(layer, d);
    const double bound =
        std::sqrt(6.0 / static_cast<double>(c_in * r.kernel_h * r.kernel_w));
    return ConvLayerParams<float>{
        random_tensor({c_out, c_in, r.kernel_h, r.kernel_w}, bound),
        Tensor::zeros({c_out}), Tensor::filled({c_out}, 1.0f),
        Tensor::zeros({c_out}), BatchNormState<float>::fresh(c_out)};
  };

  const LayerShape a0 = audio_trace(d).front(), v0 = video_trace(d).front();
  Tensor x = random_tensor({1, a0.channels, a0.height, a0.width}, 1.0);
  Tensor y = random_tensor({1, v0.channels, v0.height, v0.width}, 1.0);
  EncoderTraceReport report;
  report.audio.push_back(feature_shape(x.shape()));
  report.video.push_back(feature_shape(y.shape()));
  for (std::size_t k = 1; k <= kEncoderLayers; ++k) {
    ConvLayerParams<float> ap = make_layer(x.dim(1), k);
    ConvLayerParams<float> vp = make_layer(y.dim(1), k);
    x = encoder_layer_audio(x, k, d, ap, Mode::kEval);
    y = encoder_layer_video(y, k, d, vp, Mode::kEval);
    report.audio.push_back(feature_shape(x.shape()));
    report.video.push_back(feature_shape(y.shape()));
  }
  return report;
}

}  // namespace mffcn
