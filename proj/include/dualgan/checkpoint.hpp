#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dualgan/networks.hpp"

namespace dualgan {

/// Binary container of named float32 arrays plus string metadata.
///
/// Layout (all integers little-endian):
///   "DGANCKPT" | u32 format_version
///   u32 n_meta  { u32 len, key bytes, u32 len, value bytes } * n_meta
///   u32 n_arrays { u32 len, name bytes, u32 rank, u64 dims[rank], f32 data[] } * n_arrays
///
/// Metadata always carries format_version, preset.resolution,
/// preset.channel_divisor, preset.embedding_dim and kind.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  void put(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;

  void set_preset(const ScalePreset& preset);
  ScalePreset preset() const;
  const std::string& meta_at(const std::string& key) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Adds every parameter of net under its own (kind-prefixed) name.
void store_network(Checkpoint& ckpt, const Network& net);
/// Copies stored values into net; every parameter must be present with the
/// built shape.
void restore_network(const Checkpoint& ckpt, Network& net);

/// Single-network checkpoint with kind metadata.
Checkpoint network_checkpoint(const Network& net);

/// Exact text encoding of floats/doubles for metadata (hexfloat).
std::string encode_double(double v);
double decode_double(const std::string& s);

}  // namespace dualgan
