#include "suites.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <unistd.h>

#include "dualgan/rng.hpp"

namespace dualgan::testing {

namespace {

Tensor64 random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Keeps values away from activation kinks so central differences stay
/// inside one linear piece.
Tensor64 away_from_zero(Tensor64 t, double margin = 0.02) {
  for (auto& v : t.values()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return t;
}

std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Shape random_shape(Rng& rng, int min_rank, int max_rank, std::int64_t max_dim) {
  Shape s(static_cast<std::size_t>(pick(rng, min_rank, max_rank)));
  for (auto& d : s) d = pick(rng, 1, max_dim);
  return s;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct Case {
  std::string description;
  std::vector<Tensor64> inputs;
  std::function<Var64(std::vector<Var64>&)> f;
};

using CaseMaker = std::function<Case(Rng&)>;

Shape nhwc(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
  if (n == 0) return {h, w, c};
  return {n, h, w, c};
}

std::vector<std::pair<std::string, CaseMaker>> primitive_cases() {
  std::vector<std::pair<std::string, CaseMaker>> out;

  out.emplace_back("conv2d", [](Rng& rng) {
    const auto n = pick(rng, 0, 2), h = pick(rng, 2, 6), w = pick(rng, 2, 6), ci = pick(rng, 1, 3),
               co = pick(rng, 1, 3), k = pick(rng, 1, 4);
    const int s = static_cast<int>(pick(rng, 1, 2));
    return Case{"x" + shape_string(nhwc(n, h, w, ci)) + " k" + std::to_string(k) + " s" + std::to_string(s) +
                    " cout" + std::to_string(co),
                {random_tensor(rng, nhwc(n, h, w, ci)), random_tensor(rng, {k, k, ci, co}), random_tensor(rng, {co})},
                [s](std::vector<Var64>& v) { return conv2d(v[0], v[1], v[2], s); }};
  });

  out.emplace_back("conv_transpose2d", [](Rng& rng) {
    const auto n = pick(rng, 0, 2), h = pick(rng, 1, 4), w = pick(rng, 1, 4), ci = pick(rng, 1, 3),
               co = pick(rng, 1, 3), k = pick(rng, 1, 4);
    const int s = static_cast<int>(pick(rng, 1, 2));
    return Case{"x" + shape_string(nhwc(n, h, w, ci)) + " k" + std::to_string(k) + " s" + std::to_string(s) +
                    " cout" + std::to_string(co),
                {random_tensor(rng, nhwc(n, h, w, ci)), random_tensor(rng, {ci, k, k, co}), random_tensor(rng, {co})},
                [s](std::vector<Var64>& v) { return conv_transpose2d(v[0], v[1], v[2], s); }};
  });

  out.emplace_back("dense", [](Rng& rng) {
    const auto b = pick(rng, 0, 3), in = pick(rng, 1, 8), o = pick(rng, 1, 6);
    const Shape xs = b == 0 ? Shape{in} : Shape{b, in};
    return Case{"x" + shape_string(xs) + " out" + std::to_string(o),
                {random_tensor(rng, xs), random_tensor(rng, {in, o}), random_tensor(rng, {o})},
                [](std::vector<Var64>& v) { return dense(v[0], v[1], v[2]); }};
  });

  const std::pair<const char*, Activation> acts[] = {{"activation_identity", Activation::none()},
                                                     {"activation_relu", Activation::relu()},
                                                     {"activation_leaky_relu", Activation::leaky(0.2)},
                                                     {"activation_tanh", Activation::tanh()}};
  for (const auto& [name, act] : acts) {
    out.emplace_back(name, [act = act](Rng& rng) {
      const Shape s = random_shape(rng, 1, 4, 4);
      return Case{"x" + shape_string(s), {away_from_zero(random_tensor(rng, s, -2.0, 2.0))},
                  [act](std::vector<Var64>& v) { return apply_activation(v[0], act); }};
    });
  }

  out.emplace_back("flatten", [](Rng& rng) {
    const Shape s = nhwc(pick(rng, 0, 3), pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3));
    return Case{"x" + shape_string(s), {random_tensor(rng, s)}, [](std::vector<Var64>& v) { return flatten(v[0]); }};
  });

  out.emplace_back("reshape", [](Rng& rng) {
    const auto a = pick(rng, 1, 4), b = pick(rng, 1, 4), c = pick(rng, 1, 4);
    const Shape from{a, b, c}, to{b, a * c};
    return Case{"x" + shape_string(from) + " -> " + shape_string(to), {random_tensor(rng, from)},
                [to](std::vector<Var64>& v) { return reshape(v[0], to); }};
  });

  out.emplace_back("concat_channels", [](Rng& rng) {
    const auto n = pick(rng, 0, 2), h = pick(rng, 1, 4), w = pick(rng, 1, 4), ca = pick(rng, 1, 3),
               cb = pick(rng, 1, 3);
    return Case{"a" + shape_string(nhwc(n, h, w, ca)) + " b" + shape_string(nhwc(n, h, w, cb)),
                {random_tensor(rng, nhwc(n, h, w, ca)), random_tensor(rng, nhwc(n, h, w, cb))},
                [](std::vector<Var64>& v) { return concat_channels(v[0], v[1]); }};
  });

  out.emplace_back("pack2x2", [](Rng& rng) {
    const Shape s = nhwc(pick(rng, 0, 2), pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3));
    return Case{"quartet of " + shape_string(s),
                {random_tensor(rng, s), random_tensor(rng, s), random_tensor(rng, s), random_tensor(rng, s)},
                [](std::vector<Var64>& v) { return pack2x2(v[0], v[1], v[2], v[3]); }};
  });

  out.emplace_back("pack_quartets", [](Rng& rng) {
    const Shape s{4 * pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
    return Case{"x" + shape_string(s), {random_tensor(rng, s)},
                [](std::vector<Var64>& v) { return pack_quartets(v[0]); }};
  });

  out.emplace_back("slice_batch", [](Rng& rng) {
    Shape s = random_shape(rng, 1, 4, 4);
    s[0] = pick(rng, 1, 6);
    const auto b = pick(rng, 0, s[0] - 1), e = pick(rng, b + 1, s[0]);
    return Case{"x" + shape_string(s) + " [" + std::to_string(b) + "," + std::to_string(e) + ")",
                {random_tensor(rng, s)}, [b, e](std::vector<Var64>& v) { return slice_batch(v[0], b, e); }};
  });

  out.emplace_back("concat_batch", [](Rng& rng) {
    Shape a = random_shape(rng, 1, 4, 3), b = a;
    a[0] = pick(rng, 1, 4);
    b[0] = pick(rng, 1, 4);
    return Case{"a" + shape_string(a) + " b" + shape_string(b), {random_tensor(rng, a), random_tensor(rng, b)},
                [](std::vector<Var64>& v) { return concat_batch(v[0], v[1]); }};
  });

  out.emplace_back("reduce_mean", [](Rng& rng) {
    const Shape s = random_shape(rng, 1, 4, 4);
    return Case{"x" + shape_string(s), {random_tensor(rng, s)},
                [](std::vector<Var64>& v) { return reduce_mean(v[0]); }};
  });

  out.emplace_back("reduce_sum", [](Rng& rng) {
    const Shape s = random_shape(rng, 1, 4, 4);
    return Case{"x" + shape_string(s), {random_tensor(rng, s)},
                [](std::vector<Var64>& v) { return reduce_sum(v[0]); }};
  });

  const std::pair<const char*, std::function<Var64(Var64, Var64)>> binaries[] = {
      {"add", [](Var64 a, Var64 b) { return add(a, b); }},
      {"sub", [](Var64 a, Var64 b) { return sub(a, b); }},
      {"mul", [](Var64 a, Var64 b) { return mul(a, b); }}};
  for (const auto& [name, op] : binaries) {
    out.emplace_back(name, [op = op](Rng& rng) {
      const Shape s = random_shape(rng, 1, 4, 4);
      return Case{"x" + shape_string(s), {random_tensor(rng, s), random_tensor(rng, s)},
                  [op](std::vector<Var64>& v) { return op(v[0], v[1]); }};
    });
  }

  out.emplace_back("scale", [](Rng& rng) {
    const Shape s = random_shape(rng, 1, 4, 4);
    const double f = rng.uniform(-3.0, 3.0);
    return Case{"x" + shape_string(s), {random_tensor(rng, s)},
                [f](std::vector<Var64>& v) { return scale(v[0], f); }};
  });

  out.emplace_back("softmax_cross_entropy", [](Rng& rng) {
    const auto b = pick(rng, 1, 5), k = pick(rng, 2, 6);
    std::vector<int> labels;
    for (std::int64_t i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    return Case{"logits [" + std::to_string(b) + "," + std::to_string(k) + "]", {random_tensor(rng, {b, k}, -3, 3)},
                [labels](std::vector<Var64>& v) { return softmax_cross_entropy(v[0], labels); }};
  });

  out.emplace_back("batch_norm", [](Rng& rng) {
    const bool image = rng.below(2) == 1;
    const Shape s = image ? Shape{pick(rng, 1, 3), pick(rng, 2, 3), pick(rng, 2, 3), pick(rng, 1, 3)}
                          : Shape{pick(rng, 3, 6), pick(rng, 1, 4)};
    return Case{"x" + shape_string(s), {random_tensor(rng, s)},
                [](std::vector<Var64>& v) { return batch_norm(v[0]); }};
  });

  out.emplace_back("critic_loss", [](Rng& rng) {
    const auto n = pick(rng, 1, 6), m = pick(rng, 1, 6);
    return Case{"real [" + std::to_string(n) + ",1] fake [" + std::to_string(m) + ",1]",
                {random_tensor(rng, {n, 1}), random_tensor(rng, {m, 1})},
                [](std::vector<Var64>& v) { return critic_loss(v[0], v[1]); }};
  });

  out.emplace_back("generator_partial_loss", [](Rng& rng) {
    const auto n = pick(rng, 1, 8);
    return Case{"fake [" + std::to_string(n) + ",1]", {random_tensor(rng, {n, 1})},
                [](std::vector<Var64>& v) { return generator_partial_loss(v[0]); }};
  });

  return out;
}

}  // namespace

double gradient_error(const std::function<Var64(std::vector<Var64>&)>& f, std::vector<Tensor64> inputs, double step,
                      std::uint64_t seed) {
  std::vector<Parameter64> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("input" + std::to_string(i), inputs[i]);
  Tensor64 projection;
  Rng rng(seed);
  auto evaluate = [&](bool with_backward) {
    Tape64 tape;
    std::vector<Var64> vars;
    for (auto& p : params) vars.push_back(tape.param(p));
    Var64 out = f(vars);
    if (projection.size() == 0 || projection.shape() != out.shape()) {
      projection = random_tensor(rng, out.shape());
    }
    Var64 loss = reduce_sum(mul(out, tape.constant(projection)));
    if (with_backward) {
      for (auto& p : params) p.zero_grad();
      tape.backward(loss);
    }
    return loss.value()[0];
  };
  evaluate(true);
  std::vector<double> analytic, numeric;
  for (auto& p : params) {
    for (std::int64_t i = 0; i < p.value.size(); ++i) {
      analytic.push_back(p.grad[i]);
      const double orig = p.value[i];
      p.value[i] = orig + step;
      const double up = evaluate(false);
      p.value[i] = orig - step;
      const double down = evaluate(false);
      p.value[i] = orig;
      numeric.push_back((up - down) / (2.0 * step));
    }
  }
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
  const double scale = std::max(norm(analytic), norm(numeric));
  return scale == 0.0 ? 0.0 : norm(diff) / scale;
}

std::vector<PrimitiveGradResult> run_gradient_suite(const GradCheckConfig& config) {
  std::vector<PrimitiveGradResult> results;
  std::uint64_t tag = 0;
  for (const auto& [name, make] : primitive_cases()) {
    PrimitiveGradResult r;
    r.name = name;
    Rng rng(derive_seed(config.seed, {++tag}));
    for (int i = 0; i < config.shapes_per_primitive; ++i) {
      Case c = make(rng);
      const double err = gradient_error(c.f, c.inputs, config.step, derive_seed(config.seed, {tag, 0xfd, static_cast<std::uint64_t>(i)}));
      ++r.shapes_checked;
      if (err >= r.worst_error) {
        r.worst_error = err;
        r.worst_case = c.description;
      }
    }
    r.pass = r.worst_error <= config.tolerance && r.shapes_checked >= config.shapes_per_primitive;
    results.push_back(r);
  }
  return results;
}

// ---------------------------------------------------------------------------

std::vector<TableRow> reference_table(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::encoder:
      return {{"conv1", "128,128,3", "128,128,64", 7, 1},   {"conv2", "128,128,64", "64,64,128", 3, 2},
              {"conv3", "64,64,128", "32,32,128", 3, 2},    {"conv4", "32,32,128", "16,16,256", 3, 2},
              {"conv5", "16,16,256", "8,8,256", 3, 2},      {"flatten", "8,8,256", "16384", 0, 0},
              {"dense", "16384", "512", 0, 0}};
    case NetworkKind::decoder:
      return {{"dense", "512", "8,8,64", 0, 0},               {"conv1", "8,8,64", "8,8,64", 8, 0},
              {"deconv1", "8,8,64", "16,16,128", 3, 0},       {"deconv2", "16,16,128", "32,32,128", 3, 0},
              {"deconv3", "32,32,128", "64,64,128", 3, 0},    {"deconv4", "64,64,128", "128,128,64", 3, 0},
              {"conv2", "128,128,64", "128,128,3", 3, 0}};
    case NetworkKind::critic1:
      return {{"conv1", "128,128,6", "64,64,128", 3, 2},  {"conv2", "64,64,128", "32,32,128", 3, 2},
              {"conv3", "32,32,128", "16,16,256", 3, 2},  {"conv4", "16,16,256", "8,8,256", 3, 2},
              {"conv5", "8,8,256", "4,4,256", 3, 2},      {"flatten", "4,4,256", "4096", 0, 0},
              {"dense", "4096", "1", 0, 0}};
    case NetworkKind::critic2:
      return {{"conv1", "256,256,3", "128,128,64", 3, 2}, {"conv2", "128,128,64", "64,64,128", 3, 2},
              {"conv3", "64,64,128", "32,32,128", 3, 2},  {"conv4", "32,32,128", "16,16,256", 3, 2},
              {"conv5", "16,16,256", "8,8,256", 3, 2},    {"conv6", "8,8,256", "4,4,256", 3, 2},
              {"flatten", "4,4,256", "4096", 0, 0},       {"dense", "4096", "1", 0, 0}};
    case NetworkKind::classifier_head: break;
  }
  return {};
}

std::vector<std::string> table_mismatches(NetworkKind kind) {
  const auto preset = ScalePreset::reference();
  Network net = [&] {
    switch (kind) {
      case NetworkKind::encoder: return build_encoder(preset, 1);
      case NetworkKind::decoder: return build_decoder(preset, 1);
      case NetworkKind::critic1: return build_critic1(preset, 1);
      default: return build_critic2(preset, 1);
    }
  }();
  const auto report = net.shape_report();
  const auto table = reference_table(kind);
  std::vector<std::string> out;
  if (report.size() != table.size()) {
    out.push_back(to_string(kind) + ": " + std::to_string(report.size()) + " rows, table has " +
                  std::to_string(table.size()));
    return out;
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = report[i];
    const auto& t = table[i];
    const bool stride_ok = t.stride == 0 || r.stride == t.stride;
    if (r.name != t.name || r.input != t.input || r.output != t.output || r.kernel != t.kernel || !stride_ok) {
      out.push_back(to_string(kind) + " row " + std::to_string(i) + ": got " + r.name + " " + r.input + " -> " +
                    r.output + " k" + std::to_string(r.kernel) + " s" + std::to_string(r.stride) + ", expected " +
                    t.name + " " + t.input + " -> " + t.output + " k" + std::to_string(t.kernel));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<SchedulerCase> scheduler_cases() {
  auto st = [](double d1, double d2, double g1, double g2, bool literal = false) {
    SchedulerState s;
    s.d1_loss = d1;
    s.d2_loss = d2;
    s.g1_loss = g1;
    s.g2_loss = g2;
    s.literal_final_branch = literal;
    return s;
  };
  return {
      {"d1 above tau and larger -> train_d1", st(-0.5, -0.9, 0, 0), Action::d1()},
      {"d2 above tau and larger -> train_d2", st(-0.9, -0.5, 0, 0), Action::d2()},
      {"both d above tau, d1 larger -> train_d1", st(-0.1, -0.6, -2, -2), Action::d1()},
      {"both d above tau, d2 larger -> train_d2", st(-0.6, -0.1, -2, -2), Action::d2()},
      {"d tie above tau -> train_d2", st(-0.5, -0.5, 0, 0), Action::d2()},
      {"d2 above tau, d1 below -> train_d2", st(-1.0, -0.79, 0, 0),
       Action::d2()},
      {"both g above tau -> train_g(1,1)", st(-0.9, -0.9, -0.5, -0.5), Action::g(1, 1)},
      {"d exactly at tau counts as not above", st(-0.8, -0.8, -0.5, -0.5), Action::g(1, 1)},
      {"only g1 above tau -> train_g(1,0)", st(-0.9, -0.9, -0.5, -0.9), Action::g(1, 0)},
      {"only g2 above tau -> train_g(0,1)", st(-0.9, -0.9, -0.9, -0.5), Action::g(0, 1)},
      {"only g2 above tau, literal final branch -> train_g(1,0)", st(-0.9, -0.9, -0.9, -0.5, true), Action::g(1, 0)},
      {"g1 exactly at tau is not above", st(-0.9, -0.9, -0.8, -0.5), Action::g(0, 1)},
      {"both g at or below tau -> train_both_d", st(-0.9, -0.9, -0.9, -0.9), Action::both_d()},
      {"both g exactly at tau -> train_both_d", st(-0.8, -0.8, -0.8, -0.8), Action::both_d()},
      {"d just above tau", st(std::nextafter(-0.8, 0.0), -0.8, -3, -3), Action::d1()},
  };
}

// ---------------------------------------------------------------------------

namespace {

using Snapshot = std::vector<Tensor>;

Snapshot snapshot(Network& net) {
  Snapshot s;
  for (auto* p : net.parameters()) s.push_back(p->value);
  return s;
}

bool same(Network& net, const Snapshot& s) {
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(params[i]->value == s[i])) return false;
  }
  return true;
}

}  // namespace

IsolationResult isolation_run(int steps, std::uint64_t seed, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = RunConfig::desk();
  cfg.seed = seed;
  cfg.pretrain.epochs = 3;
  cfg.classifier.epochs = 1;
  cfg.finalize();
  auto fx = make_desk_fixture(dir, seed);
  auto pre = pretrain_encoder(cfg.preset, fx.manifest, *fx.store, cfg.pretrain);
  Trainer trainer(cfg.train, pre.encoder, fx.manifest, *fx.store);
  Network& enc = trainer.generator().encoder;
  const Snapshot encoder0 = snapshot(enc);

  const Action forced[] = {Action::d1(), Action::d2(), Action::both_d(), Action::g(1, 1), Action::g(1, 0),
                           Action::g(0, 1), Action{ActionKind::classic, {1, 1}}};
  Rng rng(derive_seed(seed, {0x150}));
  IsolationResult r;
  for (int i = 0; i < steps; ++i) {
    const Snapshot dec = snapshot(trainer.generator().decoder), c1 = snapshot(trainer.critic1()),
                   c2 = snapshot(trainer.critic2());
    const auto batch = trainer.batch_for_step(trainer.step_index());
    // Half the steps follow the scheduler, half force a random action.
    const MetricsRow row = rng.below(2) == 0 ? trainer.train_step(batch)
                                             : trainer.apply(forced[rng.below(std::size(forced))], batch);
    ++r.steps;
    ++r.actions[row.branch];
    const Action a = trainer.scheduler().last_action;
    const bool want_dec = a.kind == ActionKind::train_g || a.kind == ActionKind::classic;
    const bool want_c1 = a.kind == ActionKind::train_d1 || a.kind == ActionKind::train_both_d ||
                         a.kind == ActionKind::classic;
    const bool want_c2 = a.kind == ActionKind::train_d2 || a.kind == ActionKind::train_both_d ||
                         a.kind == ActionKind::classic;
    const bool dec_same = same(trainer.generator().decoder, dec), c1_same = same(trainer.critic1(), c1),
               c2_same = same(trainer.critic2(), c2);
    auto note = [&](const std::string& what) {
      ++r.isolation_violations;
      if (r.messages.size() < 10) r.messages.push_back("step " + std::to_string(row.step) + " " + row.branch + ": " + what);
    };
    if (!want_dec && !dec_same) note("decoder changed");
    if (!want_c1 && !c1_same) note("critic1 changed");
    if (!want_c2 && !c2_same) note("critic2 changed");
    if ((want_dec && dec_same) || (want_c1 && c1_same) || (want_c2 && c2_same)) ++r.unchanged_targets;
    for (Network* net : {&trainer.critic1(), &trainer.critic2()}) {
      for (auto* p : net->parameters()) {
        for (float v : p->value.values()) {
          if (!(std::abs(v) <= cfg.train.clip_bound)) {
            ++r.clip_violations;
            break;
          }
        }
      }
    }
    if (!same(enc, encoder0)) ++r.encoder_violations;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------

int pack_roundtrip_failures(int quartets, std::uint64_t seed) {
  Rng rng(seed);
  int failures = 0;
  for (int q = 0; q < quartets; ++q) {
    const bool batched = rng.below(2) == 1;
    const Shape s = batched ? Shape{pick(rng, 1, 3), pick(rng, 1, 9), pick(rng, 1, 9), pick(rng, 1, 4)}
                            : Shape{pick(rng, 1, 9), pick(rng, 1, 9), pick(rng, 1, 4)};
    std::array<Tensor, 4> parts;
    for (auto& p : parts) {
      p = Tensor(s);
      for (auto& v : p.values()) v = static_cast<float>(rng.uniform(-1e3, 1e3));
    }
    const Tensor packed = pack2x2(parts[0], parts[1], parts[2], parts[3]);
    const auto back = unpack2x2(packed);
    for (int i = 0; i < 4; ++i) {
      if (!(back[static_cast<std::size_t>(i)] == parts[static_cast<std::size_t>(i)])) {
        ++failures;
        break;
      }
    }
  }
  return failures;
}

DeskFixture make_desk_fixture(const std::filesystem::path& dir, std::uint64_t seed, int identities) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.num_identities = identities;
  DeskFixture fx{synth_generate(spec, dir), nullptr};
  fx.store = std::make_unique<ImageStore>(fx.manifest);
  return fx;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dualgan_test_" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace dualgan::testing
