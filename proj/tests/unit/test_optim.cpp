#include <doctest.h>

#include <cmath>

#include "dualgan/optim.hpp"

using namespace dualgan;

TEST_CASE("rmsprop follows its recurrence") {
  Parameter p("p", Tensor({3}, std::vector<float>{0.5f, -0.25f, 1.0f}));
  Optimizer opt({OptimizerKind::rmsprop, 1e-2, 0.9, 1e-8});
  const float grads[3][3] = {{1.0f, -2.0f, 0.5f}, {0.1f, 0.3f, -0.7f}, {-1.0f, 0.0f, 2.0f}};
  double v[3] = {0, 0, 0}, x[3] = {0.5, -0.25, 1.0};
  for (const auto& g : grads) {
    p.grad = Tensor({3}, std::vector<float>(g, g + 3));
    opt.step({&p});
    for (int i = 0; i < 3; ++i) {
      v[i] = 0.9 * v[i] + 0.1 * g[i] * g[i];
      x[i] -= 1e-2 * g[i] / (std::sqrt(v[i]) + 1e-8);
    }
  }
  for (int i = 0; i < 3; ++i) CHECK(p.value[i] == doctest::Approx(x[i]).epsilon(1e-5));
  CHECK(opt.state().at("p")[0] == doctest::Approx(v[0]).epsilon(1e-5));
}

TEST_CASE("first rmsprop step is about lr / sqrt(1 - rho) in magnitude") {
  Parameter p("p", Tensor({1}, 0.0f));
  Optimizer opt({OptimizerKind::rmsprop, 5e-5, 0.99, 1e-8});
  p.grad = Tensor({1}, 3.0f);
  opt.step({&p});
  CHECK(p.value[0] == doctest::Approx(-5e-5 / std::sqrt(0.01)).epsilon(1e-4));
}

TEST_CASE("sgd step and frozen skip") {
  Parameter a("a", Tensor({2}, 1.0f)), b("b", Tensor({2}, 1.0f));
  b.frozen = true;
  Optimizer opt({OptimizerKind::sgd, 0.5});
  a.grad = Tensor({2}, 2.0f);
  b.grad = Tensor({2}, 2.0f);
  opt.step({&a, &b});
  CHECK(a.value.storage() == std::vector<float>{0.0f, 0.0f});
  CHECK(b.value.storage() == std::vector<float>{1.0f, 1.0f});
}

TEST_CASE("explicit gradient map") {
  Parameter a("a", Tensor({2}, 1.0f));
  Optimizer opt({OptimizerKind::sgd, 1.0});
  opt.step({&a}, {{"a", Tensor({2}, 0.25f)}});
  CHECK(a.value[0] == 0.75f);
  CHECK_THROWS(opt.step({&a}, {}));
}

TEST_CASE("optimizer and clip validation") {
  CHECK_THROWS_AS(Optimizer({OptimizerKind::rmsprop, 0.0}), std::invalid_argument);
  CHECK(parse_optimizer_kind("sgd") == OptimizerKind::sgd);
  CHECK_THROWS(parse_optimizer_kind("adam"));
  Parameter a("a", Tensor({3}, std::vector<float>{-1.0f, 0.005f, 2.0f}));
  clip_params({&a}, 0.01f);
  CHECK(a.value.storage() == std::vector<float>{-0.01f, 0.005f, 0.01f});
  CHECK_THROWS(clip_params({&a}, 0.0f));
  a.grad = Tensor({2});
  Optimizer opt({OptimizerKind::sgd, 1.0});
  CHECK_THROWS_WITH(opt.step({&a}), doctest::Contains("gradient"));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Parameter a("a", Tensor({2}, std::vector<float>{0.3f, -0.7f}));
  const Tensor before = a.value;
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::rmsprop}) {
    Optimizer opt({kind, 1e-2});
    a.grad = Tensor({2});
    opt.step({&a});
    CHECK(a.value == before);
  }
}
