#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dualgan/autodiff.hpp"

namespace dualgan {

/// Scales the four table topologies. Reference reproduces the tables
/// (128x128 input, 512-d embedding); desk divides channels by 4.
struct ScalePreset {
  int resolution = 128;
  int channel_divisor = 1;
  int embedding_dim = 512;

  static ScalePreset reference() { return {128, 1, 512}; }
  static ScalePreset desk() { return {32, 4, 128}; }

  /// Throws std::invalid_argument when the divisibility invariants fail.
  void validate() const;
  int channels(int table_channels) const { return table_channels / channel_divisor; }
  bool operator==(const ScalePreset&) const = default;
};

enum class NetworkKind { encoder, decoder, critic1, critic2, classifier_head };

std::string to_string(NetworkKind k);
NetworkKind parse_network_kind(const std::string& s);

enum class LayerKind { conv, deconv, dense, flatten };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  Shape input;   // per-sample, no batch axis
  Shape output;  // per-sample, no batch axis
  int kernel = 0;
  int stride = 0;
  Activation activation;
  bool batch_norm = false;
};

/// One line of a shape report, mirroring an architecture-table row.
struct ShapeRow {
  std::string name;
  std::string input;
  std::string output;
  int kernel = 0;  // 0 when not applicable
  int stride = 0;  // 0 when not applicable
  bool operator==(const ShapeRow&) const = default;
};

std::string shape_csv(const Shape& s);

struct NetworkOptions {
  bool decoder_batch_norm = false;
  int critic2_pack = 4;  // 4 (2x2 mosaic) or 1 (single image)
  int num_classes = 0;   // classifier_head only
};

class Network {
 public:
  Network(NetworkKind kind, ScalePreset preset, std::vector<LayerSpec> layers, std::uint64_t seed);

  NetworkKind kind() const { return kind_; }
  const ScalePreset& preset() const { return preset_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  Shape input_shape() const { return layers_.front().input; }
  Shape output_shape() const { return layers_.back().output; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(const std::string& name);
  std::int64_t parameter_count() const;

  void set_frozen(bool frozen);
  bool frozen() const;

  /// Batched forward on a tape. Input is [N, ...input_shape()]. With
  /// track_params=false the parameters enter as constants.
  Var forward(Var input, bool track_params = true);

  /// Value-only forward.
  Tensor infer(const Tensor& input);

  std::vector<ShapeRow> shape_report() const;

 private:
  NetworkKind kind_;
  ScalePreset preset_;
  std::vector<LayerSpec> layers_;
  // Two parameters (weight, bias) per weighted layer; index -1 for flatten.
  std::vector<int> weight_index_;
  std::vector<Parameter> params_;
};

Network build_encoder(const ScalePreset& preset, std::uint64_t seed);
Network build_decoder(const ScalePreset& preset, std::uint64_t seed, const NetworkOptions& options = {});
Network build_critic1(const ScalePreset& preset, std::uint64_t seed);
Network build_critic2(const ScalePreset& preset, std::uint64_t seed, const NetworkOptions& options = {});
Network build_classifier_head(const ScalePreset& preset, int num_classes, std::uint64_t seed);

/// Frozen encoder plus trainable decoder.
struct GeneratorBundle {
  Network encoder;
  Network decoder;

  /// Embeddings of a [N,R,R,3] batch; never touches encoder parameters.
  Tensor encode(const Tensor& images);
  /// Decoder forward on a tape from precomputed embeddings.
  Var decode(Tape& tape, const Tensor& embeddings, bool track_decoder);
  /// Value-only profile -> frontal.
  Tensor generate(const Tensor& profiles);
};

/// Embedding of one image [R,R,3] or a batch [N,R,R,3].
Tensor encode(Network& encoder, const Tensor& images);

/// Critic1 on (profile, candidate) pairs; input channel order is profile then
/// candidate. Returns [N,1] scores.
Var critic1_score(Network& critic1, Var profiles, Var candidates, bool track_params);
/// Critic2 on a packed (or, with pack=1, single-image) batch. Returns [N,1].
Var critic2_score(Network& critic2, Var packed, bool track_params);

/// Scalar-returning convenience wrappers for single samples.
float critic1_score(Network& critic1, const Tensor& profile, const Tensor& candidate);
float critic2_score(Network& critic2, const Tensor& packed);

}  // namespace dualgan
