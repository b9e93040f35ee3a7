#include "dualgan/networks.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dualgan/rng.hpp"

namespace dualgan {

void ScalePreset::validate() const {
  if (resolution <= 0 || resolution % 16 != 0) {
    throw std::invalid_argument("preset: resolution must be a positive multiple of 16, got " +
                                std::to_string(resolution));
  }
  if (channel_divisor < 1) throw std::invalid_argument("preset: channel_divisor must be >= 1");
  for (int c : {64, 128, 256}) {
    if (c % channel_divisor != 0) {
      throw std::invalid_argument("preset: channel_divisor " + std::to_string(channel_divisor) +
                                  " does not divide table channel count " + std::to_string(c));
    }
  }
  if (embedding_dim < 1) throw std::invalid_argument("preset: embedding_dim must be >= 1");
}

std::string to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::encoder: return "encoder";
    case NetworkKind::decoder: return "decoder";
    case NetworkKind::critic1: return "critic1";
    case NetworkKind::critic2: return "critic2";
    case NetworkKind::classifier_head: return "classifier_head";
  }
  return "?";
}

NetworkKind parse_network_kind(const std::string& s) {
  for (auto k : {NetworkKind::encoder, NetworkKind::decoder, NetworkKind::critic1, NetworkKind::critic2,
                 NetworkKind::classifier_head}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown network kind '" + s + "'");
}

std::string shape_csv(const Shape& s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  return os.str();
}

// ---------------------------------------------------------------------------

Network::Network(NetworkKind kind, ScalePreset preset, std::vector<LayerSpec> layers, std::uint64_t seed)
    : kind_(kind), preset_(preset), layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("network: no layers");
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(kind_)}));
  const std::string prefix = to_string(kind_) + "/";
  for (const auto& l : layers_) {
    Shape wshape;
    std::int64_t fan_in = 0;
    switch (l.kind) {
      case LayerKind::conv:
        wshape = {l.kernel, l.kernel, l.input.back(), l.output.back()};
        fan_in = std::int64_t{l.kernel} * l.kernel * l.input.back();
        break;
      case LayerKind::deconv:
        wshape = {l.input.back(), l.kernel, l.kernel, l.output.back()};
        fan_in = std::int64_t{l.kernel} * l.kernel * l.input.back();
        break;
      case LayerKind::dense:
        wshape = {shape_size(l.input), shape_size(l.output)};
        fan_in = shape_size(l.input);
        break;
      case LayerKind::flatten:
        weight_index_.push_back(-1);
        continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w(wshape);
    for (auto& v : w.storage()) v = static_cast<float>(rng.uniform(-bound, bound));
    Tensor b(Shape{wshape.back()});
    for (auto& v : b.storage()) v = static_cast<float>(rng.uniform(-bound, bound));
    weight_index_.push_back(static_cast<int>(params_.size()));
    params_.emplace_back(prefix + l.name + ".weight", std::move(w));
    params_.emplace_back(prefix + l.name + ".bias", std::move(b));
  }
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Network::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Parameter& Network::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("network " + to_string(kind_) + " has no parameter " + name);
}

std::int64_t Network::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Network::set_frozen(bool frozen) {
  for (auto& p : params_) p.frozen = frozen;
}

bool Network::frozen() const {
  for (const auto& p : params_) {
    if (!p.frozen) return false;
  }
  return !params_.empty();
}

Var Network::forward(Var input, bool track_params) {
  Tape& tape = input.tape();
  const auto& s = input.shape();
  const Shape& expect = layers_.front().input;
  if (s.size() != expect.size() + 1 || !std::equal(expect.begin(), expect.end(), s.begin() + 1)) {
    throw ShapeError(to_string(kind_) + ": expected input [N," + shape_csv(expect) + "], got " + shape_string(s));
  }
  const std::int64_t n = s[0];
  Var x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.kind == LayerKind::flatten) {
      x = flatten(x);
      continue;
    }
    auto& w = params_[static_cast<std::size_t>(weight_index_[i])];
    auto& b = params_[static_cast<std::size_t>(weight_index_[i]) + 1];
    Var wv = tape.param(w, track_params);
    Var bv = tape.param(b, track_params);
    switch (l.kind) {
      case LayerKind::conv: x = conv2d(x, wv, bv, l.stride); break;
      case LayerKind::deconv: x = conv_transpose2d(x, wv, bv, l.stride); break;
      case LayerKind::dense: {
        if (x.shape().size() != 2) x = reshape(x, Shape{n, x.value().size() / n});
        x = dense(x, wv, bv);
        if (l.output.size() > 1) {
          Shape full{n};
          full.insert(full.end(), l.output.begin(), l.output.end());
          x = reshape(x, full);
        }
        break;
      }
      case LayerKind::flatten: break;
    }
    if (l.batch_norm) x = batch_norm(x);
    if (l.activation.kind != ActivationKind::identity) x = apply_activation(x, l.activation);
  }
  return x;
}

Tensor Network::infer(const Tensor& input) {
  Tape tape;
  return forward(tape.constant(input), false).value();
}

std::vector<ShapeRow> Network::shape_report() const {
  std::vector<ShapeRow> rows;
  for (const auto& l : layers_) {
    const bool spatial = l.kind == LayerKind::conv || l.kind == LayerKind::deconv;
    rows.push_back({l.name, shape_csv(l.input), shape_csv(l.output), spatial ? l.kernel : 0,
                    spatial ? l.stride : 0});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

struct Builder {
  std::vector<LayerSpec> layers;
  Shape current;

  void conv(const std::string& name, std::int64_t cout, int k, int stride, Activation act, bool bn = false) {
    Shape out{same_out_extent(current[0], stride), same_out_extent(current[1], stride), cout};
    layers.push_back({name, LayerKind::conv, current, out, k, stride, act, bn});
    current = out;
  }
  void deconv(const std::string& name, std::int64_t cout, int k, int stride, Activation act, bool bn = false) {
    Shape out{current[0] * stride, current[1] * stride, cout};
    layers.push_back({name, LayerKind::deconv, current, out, k, stride, act, bn});
    current = out;
  }
  void flatten(const std::string& name = "flatten") {
    Shape out{shape_size(current)};
    layers.push_back({name, LayerKind::flatten, current, out, 0, 0, Activation::none(), false});
    current = out;
  }
  void dense(const std::string& name, Shape out, Activation act, bool bn = false) {
    layers.push_back({name, LayerKind::dense, current, out, 0, 0, act, bn});
    current = std::move(out);
  }
};

}  // namespace

Network build_encoder(const ScalePreset& preset, std::uint64_t seed) {
  preset.validate();
  const auto act = Activation::leaky(0.2);
  Builder b{{}, {preset.resolution, preset.resolution, 3}};
  b.conv("conv1", preset.channels(64), 7, 1, act);
  b.conv("conv2", preset.channels(128), 3, 2, act);
  b.conv("conv3", preset.channels(128), 3, 2, act);
  b.conv("conv4", preset.channels(256), 3, 2, act);
  b.conv("conv5", preset.channels(256), 3, 2, act);
  b.flatten();
  b.dense("dense", {preset.embedding_dim}, Activation::none());
  return Network(NetworkKind::encoder, preset, std::move(b.layers), seed);
}

Network build_decoder(const ScalePreset& preset, std::uint64_t seed, const NetworkOptions& options) {
  preset.validate();
  const auto act = Activation::relu();
  const bool bn = options.decoder_batch_norm;
  const std::int64_t base = preset.resolution / 16;
  Builder b{{}, {preset.embedding_dim}};
  b.dense("dense", {base, base, preset.channels(64)}, act, bn);
  b.conv("conv1", preset.channels(64), 8, 1, act, bn);
  b.deconv("deconv1", preset.channels(128), 3, 2, act, bn);
  b.deconv("deconv2", preset.channels(128), 3, 2, act, bn);
  b.deconv("deconv3", preset.channels(128), 3, 2, act, bn);
  b.deconv("deconv4", preset.channels(64), 3, 2, act, bn);
  b.conv("conv2", 3, 3, 1, Activation::tanh());
  return Network(NetworkKind::decoder, preset, std::move(b.layers), seed);
}

Network build_critic1(const ScalePreset& preset, std::uint64_t seed) {
  preset.validate();
  const auto act = Activation::leaky(0.2);
  Builder b{{}, {preset.resolution, preset.resolution, 6}};
  b.conv("conv1", preset.channels(128), 3, 2, act);
  b.conv("conv2", preset.channels(128), 3, 2, act);
  b.conv("conv3", preset.channels(256), 3, 2, act);
  b.conv("conv4", preset.channels(256), 3, 2, act);
  b.conv("conv5", preset.channels(256), 3, 2, act);
  b.flatten();
  b.dense("dense", {1}, Activation::none());
  return Network(NetworkKind::critic1, preset, std::move(b.layers), seed);
}

Network build_critic2(const ScalePreset& preset, std::uint64_t seed, const NetworkOptions& options) {
  preset.validate();
  if (options.critic2_pack != 4 && options.critic2_pack != 1) {
    throw std::invalid_argument("critic2: pack must be 4 or 1, got " + std::to_string(options.critic2_pack));
  }
  const std::int64_t side = options.critic2_pack == 4 ? 2 * preset.resolution : preset.resolution;
  const auto act = Activation::leaky(0.2);
  Builder b{{}, {side, side, 3}};
  b.conv("conv1", preset.channels(64), 3, 2, act);
  b.conv("conv2", preset.channels(128), 3, 2, act);
  b.conv("conv3", preset.channels(128), 3, 2, act);
  b.conv("conv4", preset.channels(256), 3, 2, act);
  b.conv("conv5", preset.channels(256), 3, 2, act);
  b.conv("conv6", preset.channels(256), 3, 2, act);
  b.flatten();
  b.dense("dense", {1}, Activation::none());
  return Network(NetworkKind::critic2, preset, std::move(b.layers), seed);
}

Network build_classifier_head(const ScalePreset& preset, int num_classes, std::uint64_t seed) {
  preset.validate();
  if (num_classes < 2) throw std::invalid_argument("classifier head needs at least 2 classes");
  Builder b{{}, {preset.embedding_dim}};
  b.dense("logits", {num_classes}, Activation::none());
  return Network(NetworkKind::classifier_head, preset, std::move(b.layers), seed);
}

// ---------------------------------------------------------------------------

namespace {

Tensor as_batch(const Tensor& images, const Shape& per_sample, const char* who) {
  if (images.shape() == per_sample) {
    Shape s{1};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return images.reshaped(s);
  }
  if (images.rank() == static_cast<std::int64_t>(per_sample.size()) + 1 &&
      std::equal(per_sample.begin(), per_sample.end(), images.shape().begin() + 1)) {
    return images;
  }
  throw ShapeError(std::string(who) + ": expected [" + shape_csv(per_sample) + "] or [N," + shape_csv(per_sample) +
                   "], got " + shape_string(images.shape()));
}

}  // namespace

Tensor encode(Network& encoder, const Tensor& images) {
  if (encoder.kind() != NetworkKind::encoder) throw std::invalid_argument("encode: not an encoder");
  const bool single = images.shape() == encoder.input_shape();
  Tensor out = encoder.infer(as_batch(images, encoder.input_shape(), "encode"));
  if (single) return out.reshaped(encoder.output_shape());
  return out;
}

Tensor GeneratorBundle::encode(const Tensor& images) { return dualgan::encode(encoder, images); }

Var GeneratorBundle::decode(Tape& tape, const Tensor& embeddings, bool track_decoder) {
  return decoder.forward(tape.constant(as_batch(embeddings, decoder.input_shape(), "decode")), track_decoder);
}

Tensor GeneratorBundle::generate(const Tensor& profiles) {
  const bool single = profiles.shape() == encoder.input_shape();
  Tensor out = decoder.infer(encode(as_batch(profiles, encoder.input_shape(), "generate")));
  if (single) return out.reshaped(decoder.output_shape());
  return out;
}

Var critic1_score(Network& critic1, Var profiles, Var candidates, bool track_params) {
  if (profiles.shape() != candidates.shape()) {
    throw ShapeError("critic1_score: profile " + shape_string(profiles.shape()) + " vs candidate " +
                     shape_string(candidates.shape()));
  }
  return critic1.forward(concat_channels(profiles, candidates), track_params);
}

Var critic2_score(Network& critic2, Var packed, bool track_params) { return critic2.forward(packed, track_params); }

float critic1_score(Network& critic1, const Tensor& profile, const Tensor& candidate) {
  Shape img = critic1.input_shape();
  img.back() = 3;
  Tape tape;
  auto p = tape.constant(as_batch(profile, img, "critic1_score"));
  auto c = tape.constant(as_batch(candidate, img, "critic1_score"));
  return critic1_score(critic1, p, c, false).value()[0];
}

float critic2_score(Network& critic2, const Tensor& packed) {
  Tape tape;
  return critic2_score(critic2, tape.constant(as_batch(packed, critic2.input_shape(), "critic2_score")), false)
      .value()[0];
}

}  // namespace dualgan
