#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dualgan/config.hpp"
#include "dualgan/eval.hpp"

namespace dualgan {

/// Data, frozen encoder and evaluation classifier shared by every training
/// run of one seed.
struct SeedSetup {
  RunConfig config;
  Manifest manifest;
  std::unique_ptr<ImageStore> store;
  Network encoder;
  double pretrain_accuracy = 0.0;
  IdentityClassifier classifier;
};

/// Synthesizes the dataset under dir, pretrains the encoder and trains the
/// identity classifier.
SeedSetup prepare_seed(const RunConfig& config, const std::filesystem::path& dir);

struct RunOutcome {
  std::string label;
  std::vector<MetricsRow> metrics;
  EvalReport report;
  double final_generator_loss = 0.0;  // mean g1+g2 over the last rows
  double seconds = 0.0;
};

/// Mean of g1_loss + g2_loss over the last `window` rows (all rows if fewer).
double final_generator_loss(const std::vector<MetricsRow>& metrics, std::size_t window = 100);

double median(std::vector<double> values);

using StepObserver = std::function<void(const MetricsRow&, Trainer&)>;

/// Trains from the setup's encoder with `train` (seed and preset taken from
/// the setup) and evaluates on the probe records.
RunOutcome run_training(SeedSetup& setup, TrainConfig train, const std::string& label,
                        const StepObserver& observer = {});

struct ComparisonRow {
  std::uint64_t seed = 0;
  RunOutcome controlled;
  RunOutcome classic;
  RunOutcome pack1;
  double chance_fooling = 0.0;
};

struct ComparisonSummary {
  std::vector<ComparisonRow> rows;
  double median_fooling_controlled = 0, median_coverage_controlled = 0;
  double median_final_g_controlled = 0, median_final_g_classic = 0;
  double median_coverage_pack4 = 0, median_coverage_pack1 = 0;
  double median_chance_fooling = 0;
};

/// Controlled, classic and pack=1 runs per seed from a shared setup.
ComparisonSummary compare_modes(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& work_dir,
                                const std::function<void(const std::string&)>& log = {});

std::string summary_json(const ComparisonSummary& s);

}  // namespace dualgan
