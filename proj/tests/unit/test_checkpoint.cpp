#include <doctest.h>

#include <fstream>

#include "suites.hpp"

using namespace dualgan;
namespace fs = std::filesystem;

TEST_CASE("network checkpoint round trip") {
  const auto dir = testing::scratch_dir("ckpt_roundtrip");
  auto dec = build_decoder(ScalePreset::desk(), 9);
  write_checkpoint(dir / "d.ckpt", network_checkpoint(dec));
  const Checkpoint back = read_checkpoint(dir / "d.ckpt");
  CHECK(back.meta_at("kind") == "decoder");
  CHECK(back.preset() == ScalePreset::desk());
  auto other = build_decoder(ScalePreset::desk(), 10);
  restore_network(back, other);
  for (std::size_t i = 0; i < dec.parameters().size(); ++i) {
    CHECK(other.parameters()[i]->value == dec.parameters()[i]->value);
  }
  // Writing the same content twice gives identical bytes.
  write_checkpoint(dir / "e.ckpt", network_checkpoint(dec));
  std::ifstream a(dir / "d.ckpt", std::ios::binary), b(dir / "e.ckpt", std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_CASE("checkpoint errors") {
  const auto dir = testing::scratch_dir("ckpt_errors");
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.ckpt"), CheckpointError);
  {
    std::ofstream(dir / "bad.ckpt") << "NOTACKPT";
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "bad.ckpt"), CheckpointError);

  auto enc = build_encoder(ScalePreset::desk(), 1);
  write_checkpoint(dir / "enc.ckpt", network_checkpoint(enc));
  const auto size = fs::file_size(dir / "enc.ckpt");
  fs::resize_file(dir / "enc.ckpt", size - 7);
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "enc.ckpt"), doctest::Contains("truncated"), CheckpointError);

  // Preset and shape mismatches are refused.
  Checkpoint c = network_checkpoint(enc);
  auto ref = build_encoder(ScalePreset::reference(), 1);
  CHECK_THROWS_AS(restore_network(c, ref), CheckpointError);
  Checkpoint wrong;
  wrong.put("encoder/conv1.weight", Tensor({1}));
  auto enc2 = build_encoder(ScalePreset::desk(), 1);
  CHECK_THROWS_AS(restore_network(wrong, enc2), CheckpointError);
}

TEST_CASE("hexfloat metadata is exact") {
  for (double v : {0.1, -0.8, 1e-300, 12345.678901234567}) CHECK(decode_double(encode_double(v)) == v);
}
