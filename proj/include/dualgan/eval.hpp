#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dualgan/checkpoint.hpp"
#include "dualgan/data.hpp"
#include "dualgan/networks.hpp"
#include "dualgan/training.hpp"

namespace dualgan {

/// Encoder-topology network plus softmax head, trained on real frontals only.
struct IdentityClassifier {
  Network encoder;
  Network head;
  std::vector<int> classes;  // class index -> identity id
  double train_accuracy = 0.0;
  std::vector<std::size_t> training_records;

  /// Top-1 identity id per image of a [N,R,R,3] batch.
  std::vector<int> predict(const Tensor& images);
  bool knows(int identity) const;
};

/// Trains on records with |yaw| <= the manifest's frontal threshold.
IdentityClassifier train_identity_classifier(const ScalePreset& preset, const Manifest& manifest,
                                             const ImageStore& store, const PretrainConfig& config);

Checkpoint classifier_checkpoint(const IdentityClassifier& c);
IdentityClassifier restore_classifier(const Checkpoint& ckpt);

/// Maps a batch of profiles (and their record indices) to generated frontals.
using GenerateFn = std::function<Tensor(const Tensor& profiles, const std::vector<std::size_t>& records)>;

GenerateFn generator_fn(GeneratorBundle& generator);
/// Returns each source identity's first real frontal verbatim.
GenerateFn oracle_frontal_fn(const Manifest& manifest, const ImageStore& store);
/// Independent uniform noise in [-1,1] per sample, seeded by record index.
GenerateFn noise_fn(std::uint64_t seed);

struct EvalReport {
  double fooling_rate = 0.0;
  std::map<int, int> per_identity_hits;
  int modes_covered = 0;
  int num_samples = 0;
};

std::string to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

/// Profiles of the test split when it is non-empty, otherwise all profiles.
std::vector<std::size_t> probe_records(const Manifest& manifest);

/// Hit: the classifier's top-1 identity on the generated frontal equals the
/// profile's identity. Also fills modes_covered.
EvalReport fooling_rate(const GenerateFn& generate, IdentityClassifier& classifier, const Manifest& manifest,
                        const ImageStore& store, const std::vector<std::size_t>& records);

/// Number of distinct top-1 classes over the generated outputs.
int mode_coverage(const GenerateFn& generate, IdentityClassifier& classifier, const ImageStore& store,
                  const std::vector<std::size_t>& records);

/// One row per profile: profile, generated, ground-truth frontal tiles.
Image sample_grid(const GenerateFn& generate, const Manifest& manifest, const ImageStore& store,
                  const std::vector<std::size_t>& records);
void export_sample_grid(const GenerateFn& generate, const Manifest& manifest, const ImageStore& store,
                        const std::vector<std::size_t>& records, const std::filesystem::path& path);

}  // namespace dualgan
