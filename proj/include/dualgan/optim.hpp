#pragma once

#include <map>
#include <string>
#include <vector>

#include "dualgan/autodiff.hpp"

namespace dualgan {

enum class OptimizerKind { rmsprop, sgd };

OptimizerKind parse_optimizer_kind(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double lr = 5e-5;
  double rho = 0.99;  // rmsprop decay of the squared-gradient average
  double epsilon = 1e-8;
};

/// Per-parameter update rule. State (the rmsprop squared-gradient average) is
/// keyed by parameter name so it can be checkpointed.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  const OptimizerConfig& config() const { return config_; }

  /// Applies one update from each parameter's accumulated grad. Frozen
  /// parameters are skipped. Throws if a parameter has no gradient buffer.
  void step(const std::vector<Parameter*>& params);

  /// Same rule with explicit name-keyed gradients.
  void step(const std::vector<Parameter*>& params, const std::map<std::string, Tensor>& grads);

  std::map<std::string, Tensor>& state() { return square_avg_; }
  const std::map<std::string, Tensor>& state() const { return square_avg_; }

 private:
  void update(Parameter& p, const Tensor& g);

  OptimizerConfig config_;
  std::map<std::string, Tensor> square_avg_;
};

/// Clamps every value of every parameter into [-bound, bound].
void clip_params(const std::vector<Parameter*>& params, float bound);

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace dualgan
