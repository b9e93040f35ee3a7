#pragma once

#include <filesystem>
#include <utility>
#include <vector>
#include <string>

#include "dualgan/data.hpp"
#include "dualgan/training.hpp"

namespace dualgan {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a command needs, resolved from defaults, a key=value file and
/// command-line overrides (later sources win). One seed drives every
/// component; each derives its own stream from it.
struct RunConfig {
  std::uint64_t seed = 1;
  ScalePreset preset = ScalePreset::desk();
  SyntheticSpec synth;
  PretrainConfig pretrain;
  PretrainConfig classifier;
  TrainConfig train;
  std::int64_t checkpoint_every = 0;  // 0 = only the final checkpoint
  bool wall_clock = false;  // when false, wall_ms is logged as 0 so reruns are bit-identical
  double frontal_threshold = 10.0;

  /// Settings of the desk-scale experiment.
  static RunConfig desk();

  /// Applies one key=value assignment; throws ConfigError on unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);
  /// Propagates seed and preset into the component configs and validates.
  void finalize();

  /// Fully resolved key=value text, parseable by load_config.
  std::string to_text() const;
};

/// Parses lines of "key = value"; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_assignments(const std::string& text);
void apply_assignments(RunConfig& config, const std::vector<std::pair<std::string, std::string>>& kv);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace dualgan
