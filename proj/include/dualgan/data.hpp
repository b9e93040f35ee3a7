#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dualgan/tensor.hpp"

namespace dualgan {

enum class Split { train, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct FaceRecord {
  std::string image_path;  // relative to the manifest directory, or absolute
  int identity_id = 0;
  double yaw_degrees = 0.0;  // 0 = frontal, |yaw| <= 90
  Split split = Split::train;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IdentityCounts {
  int frontal = 0;
  int profile = 0;
};

struct Manifest {
  std::vector<FaceRecord> records;
  double frontal_threshold_degrees = 10.0;
  std::filesystem::path root;  // directory image paths are resolved against

  bool is_frontal(const FaceRecord& r) const;
  std::filesystem::path resolve(const FaceRecord& r) const;
  /// Sorted distinct identity ids.
  std::vector<int> identities() const;
  std::map<int, IdentityCounts> counts() const;

  /// Throws ManifestError naming the first identity lacking a frontal or a
  /// profile record.
  void validate() const;
};

/// CSV with header "path,identity,yaw,split". Validates before returning.
Manifest load_manifest(const std::filesystem::path& path, double frontal_threshold_degrees = 10.0);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// ---------------------------------------------------------------------------
// Images

/// Interleaved 8-bit pixels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  bool operator==(const Image&) const = default;
};

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// x -> x/127.5 - 1, giving [H,W,3] in [-1,1].
Tensor normalize(const Image& image);
/// Inverse affine map with clamping and rounding; accepts [H,W,3].
Image denormalize(const Tensor& t);

// ---------------------------------------------------------------------------
// Synthetic paired faces

struct SyntheticSpec {
  int num_identities = 16;
  std::vector<double> poses_per_identity{0, 30, -30, 60, -60};
  int resolution = 32;
  std::uint64_t seed = 1;
  /// Poses (subset of poses_per_identity) whose records go to the test split.
  std::vector<double> test_poses;

  void validate() const;
};

/// Deterministic per-identity appearance.
struct FaceParams {
  double skin[3], hair[3], eyes[3], mouth[3];
  double half_width, half_height;
  double eye_angle, eye_y, eye_size;
  double mouth_angle, mouth_y;
  double hairline_y;
  double face_angle;
};

FaceParams identity_params(std::uint64_t seed, int identity, int attempt = 0);
/// Renders one face at the given yaw (degrees) as an RGB image.
Image render_face(const FaceParams& params, double yaw_degrees, int resolution);

/// Writes images/ and manifest.csv under out_dir and returns the manifest.
Manifest synth_generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Pairs and batches

/// Stateless-indexable stream of (profile, frontal) record pairs with a
/// shared identity. Index i draws from epoch i / P, where each epoch is a
/// seeded permutation of all P profile records.
class PairStream {
 public:
  struct Pair {
    std::size_t profile = 0;  // record index
    std::size_t frontal = 0;  // record index
    int identity = 0;
  };

  PairStream(const Manifest& manifest, std::uint64_t seed, Split split = Split::train);

  Pair pair_at(std::uint64_t index) const;
  Pair next() { return pair_at(position_++); }
  std::uint64_t position() const { return position_; }
  void seek(std::uint64_t position) { position_ = position; }

  std::size_t profile_count() const { return profiles_.size(); }
  const std::vector<std::size_t>& frontals_of(int identity) const;

 private:
  std::uint64_t seed_;
  std::vector<std::size_t> profiles_;
  std::map<int, std::vector<std::size_t>> frontals_;
  std::vector<int> identity_of_;  // by record index
  mutable std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  mutable std::vector<std::size_t> order_;
  std::uint64_t position_ = 0;
};

/// All manifest images decoded and normalized, indexed like records.
class ImageStore {
 public:
  explicit ImageStore(const Manifest& manifest);
  ImageStore(std::vector<Tensor> images, int resolution);

  const Tensor& at(std::size_t record) const { return images_.at(record); }
  std::size_t size() const { return images_.size(); }
  int resolution() const { return resolution_; }
  /// Stacks the listed records into [N,R,R,3].
  Tensor gather(const std::vector<std::size_t>& records) const;

 private:
  std::vector<Tensor> images_;
  int resolution_ = 0;
};

struct PairBatch {
  Tensor profiles;  // [B,R,R,3]
  Tensor frontals;  // [B,R,R,3]
  std::vector<int> identity_ids;
  std::vector<std::size_t> profile_records;
  std::vector<std::size_t> frontal_records;
};

PairBatch make_batch(const PairStream& stream, const ImageStore& store, std::uint64_t first_index, int batch_size);

}  // namespace dualgan
