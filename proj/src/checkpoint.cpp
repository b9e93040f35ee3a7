#include "dualgan/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace dualgan {

namespace {

constexpr char kMagic[8] = {'D', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint: truncated file");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, Tensor t) {
  for (auto& [n, v] : arrays) {
    if (n == name) {
      v = std::move(t);
      return;
    }
  }
  arrays.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, v] : arrays) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, v] : arrays) {
    if (n == name) return v;
  }
  throw CheckpointError("checkpoint: missing array " + name);
}

void Checkpoint::set_preset(const ScalePreset& preset) {
  meta["format_version"] = std::to_string(kFormatVersion);
  meta["preset.resolution"] = std::to_string(preset.resolution);
  meta["preset.channel_divisor"] = std::to_string(preset.channel_divisor);
  meta["preset.embedding_dim"] = std::to_string(preset.embedding_dim);
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint: missing metadata " + key);
  return it->second;
}

ScalePreset Checkpoint::preset() const {
  return {std::stoi(meta_at("preset.resolution")), std::stoi(meta_at("preset.channel_divisor")),
          std::stoi(meta_at("preset.embedding_dim"))};
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  static_assert(sizeof(float) == 4);
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, t] : ckpt.arrays) {
    put_str(out, name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  // Write to a sibling and rename so an interrupted write never leaves a
  // half-written checkpoint under the final name.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("checkpoint: bad magic in " + path.string());
  const auto version = r.le<std::uint32_t>();
  if (version != Checkpoint::kFormatVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_meta = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    ckpt.meta[k] = r.str();
  }
  const auto n_arrays = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    auto name = r.str();
    const auto rank = r.le<std::uint32_t>();
    Shape s;
    for (std::uint32_t d = 0; d < rank; ++d) s.push_back(static_cast<std::int64_t>(r.le<std::uint64_t>()));
    Tensor t(s);
    for (auto& v : t.storage()) v = std::bit_cast<float>(r.le<std::uint32_t>());
    ckpt.arrays.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes in " + path.string());
  return ckpt;
}

void store_network(Checkpoint& ckpt, const Network& net) {
  for (const auto* p : net.parameters()) ckpt.put(p->name, p->value);
}

void restore_network(const Checkpoint& ckpt, Network& net) {
  if (ckpt.meta.count("preset.resolution") && !(ckpt.preset() == net.preset())) {
    throw CheckpointError("checkpoint: preset does not match the built " + to_string(net.kind()));
  }
  for (auto* p : net.parameters()) {
    const auto& t = ckpt.get(p->name);
    if (t.shape() != p->value.shape()) {
      throw CheckpointError("checkpoint: " + p->name + " has shape " + shape_string(t.shape()) + ", network expects " +
                            shape_string(p->value.shape()));
    }
    p->value = t;
  }
}

Checkpoint network_checkpoint(const Network& net) {
  Checkpoint ckpt;
  ckpt.set_preset(net.preset());
  ckpt.meta["kind"] = to_string(net.kind());
  store_network(ckpt, net);
  return ckpt;
}

std::string encode_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double decode_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

}  // namespace dualgan
