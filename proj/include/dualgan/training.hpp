#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualgan/checkpoint.hpp"
#include "dualgan/data.hpp"
#include "dualgan/networks.hpp"
#include "dualgan/optim.hpp"

namespace dualgan {

// ---------------------------------------------------------------------------
// Wasserstein losses. Critic loss mean(fake) - mean(real) is minimized by the
// critic; generator partial loss -mean(fake) is minimized by the generator.

float critic_loss(std::span<const float> real_scores, std::span<const float> fake_scores);
float generator_partial_loss(std::span<const float> fake_scores);

template <typename T>
BasicVar<T> critic_loss(BasicVar<T> real_scores, BasicVar<T> fake_scores);
template <typename T>
BasicVar<T> generator_partial_loss(BasicVar<T> fake_scores);

struct LossWeights {
  float w1 = 1.0f;
  float w2 = 1.0f;
  bool operator==(const LossWeights&) const = default;
};

float combined_generator_loss(float g1, float g2, LossWeights weights);

// ---------------------------------------------------------------------------
// Intervention scheduler

enum class ActionKind { train_d1, train_d2, train_g, train_both_d, classic };

struct Action {
  ActionKind kind = ActionKind::train_d1;
  LossWeights weights{0.0f, 0.0f};  // meaningful for train_g / classic only
  bool operator==(const Action&) const = default;

  static Action d1() { return {ActionKind::train_d1, {0, 0}}; }
  static Action d2() { return {ActionKind::train_d2, {0, 0}}; }
  static Action both_d() { return {ActionKind::train_both_d, {0, 0}}; }
  static Action g(float w1, float w2) { return {ActionKind::train_g, {w1, w2}}; }
};

/// Branch label written to the metrics CSV, e.g. "train_g_10".
std::string branch_name(const Action& a);

struct SchedulerState {
  double d1_loss = 0.0;
  double d2_loss = 0.0;
  double g1_loss = 0.0;
  double g2_loss = 0.0;
  double tau = -0.8;
  Action last_action = Action::d1();
  /// When set, the single-generator-partial branch uses weights (1,0) in
  /// both cases instead of (0,1) for the g2-above-threshold case.
  bool literal_final_branch = false;
};

/// Pure branch selection:
///   d1 > tau or d2 > tau        -> train_d1 if d1 > d2, else train_d2
///   g1 > tau and g2 > tau       -> train_g(1,1)
///   exactly one of g1, g2 > tau -> train_g with weight 1 on that partial
///   otherwise                   -> train_both_d
/// Throws NumericError on a NaN loss.
Action schedule_decision(const SchedulerState& state);

// ---------------------------------------------------------------------------
// Training loop

enum class TrainMode { controlled, classic };
std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  ScalePreset preset = ScalePreset::desk();
  int batch_size = 16;
  std::int64_t max_steps = 1000;
  std::uint64_t seed = 1;
  float clip_bound = 0.01f;
  OptimizerConfig critic_optimizer{};
  OptimizerConfig generator_optimizer{};
  double mismatch_ratio = 0.5;
  double tau = -0.8;
  TrainMode mode = TrainMode::controlled;
  int pack = 4;
  double ema = 0.0;  // smoothing of scheduler loss estimates; 0 = off
  bool decoder_batch_norm = false;
  bool literal_final_branch = false;

  void validate() const;
};

struct MetricsRow {
  std::int64_t step = 0;
  std::string mode;
  std::string branch;
  double d1_loss = 0, d2_loss = 0, g1_loss = 0, g2_loss = 0;
  float w1 = 0, w2 = 0;
  double wall_ms = 0;
};

std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

struct StepLosses {
  double d1 = 0, d2 = 0, g1 = 0, g2 = 0;
};

/// Minibatch with everything a step consumes.
struct TrainingBatch {
  PairBatch pairs;
  Tensor embeddings;          // [B,E] frozen-encoder embeddings of the profiles
  Tensor mismatched_frontals;  // [B,R,R,3] real frontals of other identities
};

class Trainer {
 public:
  /// The encoder must already be pretrained; it is frozen here.
  Trainer(TrainConfig config, Network encoder, const Manifest& manifest, const ImageStore& store);

  const TrainConfig& config() const { return config_; }
  std::int64_t step_index() const { return step_; }
  const SchedulerState& scheduler() const { return state_; }

  GeneratorBundle& generator() { return gen_; }
  Network& critic1() { return critic1_; }
  Network& critic2() { return critic2_; }

  /// Batch for an arbitrary step index (pure function of seed and index).
  TrainingBatch batch_for_step(std::int64_t step) const;

  /// Runs one step of the configured mode on the next batch.
  MetricsRow step();
  /// Scheduler-controlled step on the given batch.
  MetricsRow train_step(const TrainingBatch& batch);
  /// Critic1, then Critic2, then the generator with weights (1,1).
  MetricsRow classic_alternate_step(const TrainingBatch& batch);
  /// Executes a given action on the batch (the scheduler is bypassed but its
  /// loss estimates are still refreshed).
  MetricsRow apply(const Action& action, const TrainingBatch& batch);

  /// Losses of the current networks on a batch, without updates.
  StepLosses evaluate(const TrainingBatch& batch);

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  struct Forward;
  Forward forward(const TrainingBatch& batch);
  void rescore_critics(Forward& f, const TrainingBatch& batch);
  void update_critic(Network& net, Optimizer& opt, Forward& f, int which);
  void update_generator(Forward& f, LossWeights w);
  void update_both_critics(Forward& f);
  void execute(const Action& a, Forward& f, const TrainingBatch& batch);
  MetricsRow finish(const Action& a, const StepLosses& l, std::chrono::steady_clock::time_point t0);
  void absorb(const StepLosses& l);
  MetricsRow make_row(const Action& a, const StepLosses& l, double ms) const;

  TrainConfig config_;
  GeneratorBundle gen_;
  Network critic1_;
  Network critic2_;
  Optimizer critic1_opt_;
  Optimizer critic2_opt_;
  Optimizer generator_opt_;
  const ImageStore* store_;
  PairStream stream_;
  std::vector<int> identity_ids_;
  std::vector<Tensor> embedding_cache_;  // by record index; empty for frontals
  SchedulerState state_;
  bool state_initialized_ = false;
  std::int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Supervised identity classification (encoder pretraining, eval classifier)

struct PretrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 1;
  bool use_profiles = true;
  bool use_frontals = true;
};

struct ClassifierResult {
  Network encoder;
  Network head;
  std::vector<int> classes;  // class index -> identity id
  double accuracy = 0.0;     // on the training records
  double final_loss = 0.0;
  std::vector<std::size_t> training_records;
};

/// Encoder topology + softmax head trained with cross-entropy over identities.
ClassifierResult train_classifier(const ScalePreset& preset, const Manifest& manifest, const ImageStore& store,
                                  const std::vector<std::size_t>& records, const PretrainConfig& config);

struct PretrainResult {
  Network encoder;  // frozen
  double accuracy = 0.0;
};

/// Records used follow config.use_profiles / use_frontals. The head is
/// discarded.
PretrainResult pretrain_encoder(const ScalePreset& preset, const Manifest& manifest, const ImageStore& store,
                                const PretrainConfig& config);

}  // namespace dualgan
