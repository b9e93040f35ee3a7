#include "dualgan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualgan {

OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  if (s == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected rmsprop or sgd)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::rmsprop ? "rmsprop" : "sgd"; }

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.lr > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
}

void Optimizer::step(const std::vector<Parameter*>& params) {
  for (auto* p : params) {
    if (p->frozen) continue;
    if (p->grad.shape() != p->value.shape()) throw std::invalid_argument("optimizer: missing gradient for " + p->name);
    update(*p, p->grad);
  }
}

void Optimizer::step(const std::vector<Parameter*>& params, const std::map<std::string, Tensor>& grads) {
  for (auto* p : params) {
    if (p->frozen) continue;
    auto it = grads.find(p->name);
    if (it == grads.end()) throw std::invalid_argument("optimizer: missing gradient for " + p->name);
    if (it->second.shape() != p->value.shape()) throw ShapeError("optimizer: gradient shape mismatch for " + p->name);
    update(*p, it->second);
  }
}

void Optimizer::update(Parameter& p, const Tensor& g) {
  const float lr = static_cast<float>(config_.lr);
  float* w = p.value.data();
  const float* gd = g.data();
  const std::int64_t n = p.value.size();
  if (config_.kind == OptimizerKind::sgd) {
    for (std::int64_t i = 0; i < n; ++i) w[i] -= lr * gd[i];
    return;
  }
  auto [it, inserted] = square_avg_.try_emplace(p.name, p.value.shape());
  if (it->second.shape() != p.value.shape()) throw ShapeError("optimizer: state shape mismatch for " + p.name);
  float* v = it->second.data();
  const float rho = static_cast<float>(config_.rho), eps = static_cast<float>(config_.epsilon);
  for (std::int64_t i = 0; i < n; ++i) {
    v[i] = rho * v[i] + (1.0f - rho) * gd[i] * gd[i];
    w[i] -= lr * gd[i] / (std::sqrt(v[i]) + eps);
  }
}

void clip_params(const std::vector<Parameter*>& params, float bound) {
  if (!(bound > 0.0f)) throw std::invalid_argument("clip_params: bound must be positive");
  for (auto* p : params) {
    for (auto& v : p->value.storage()) v = std::clamp(v, -bound, bound);
  }
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace dualgan
