#include "dualgan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include "dualgan/rng.hpp"

namespace dualgan {

// ---------------------------------------------------------------------------
// Losses

namespace {

double mean_of(std::span<const float> v, const char* who) {
  if (v.empty()) throw std::invalid_argument(std::string(who) + ": empty score list");
  double s = 0.0;
  for (float x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

float critic_loss(std::span<const float> real_scores, std::span<const float> fake_scores) {
  return static_cast<float>(mean_of(fake_scores, "critic_loss") - mean_of(real_scores, "critic_loss"));
}

float generator_partial_loss(std::span<const float> fake_scores) {
  return static_cast<float>(-mean_of(fake_scores, "generator_partial_loss"));
}

template <typename T>
BasicVar<T> critic_loss(BasicVar<T> real_scores, BasicVar<T> fake_scores) {
  return sub(reduce_mean(fake_scores), reduce_mean(real_scores));
}

template <typename T>
BasicVar<T> generator_partial_loss(BasicVar<T> fake_scores) {
  return scale(reduce_mean(fake_scores), T(-1));
}

template BasicVar<float> critic_loss<float>(BasicVar<float>, BasicVar<float>);
template BasicVar<double> critic_loss<double>(BasicVar<double>, BasicVar<double>);
template BasicVar<float> generator_partial_loss<float>(BasicVar<float>);
template BasicVar<double> generator_partial_loss<double>(BasicVar<double>);

float combined_generator_loss(float g1, float g2, LossWeights weights) { return weights.w1 * g1 + weights.w2 * g2; }

// ---------------------------------------------------------------------------
// Scheduler

std::string branch_name(const Action& a) {
  switch (a.kind) {
    case ActionKind::train_d1: return "train_d1";
    case ActionKind::train_d2: return "train_d2";
    case ActionKind::train_both_d: return "train_both_d";
    case ActionKind::classic: return "classic";
    case ActionKind::train_g: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "train_g_%d%d", static_cast<int>(a.weights.w1), static_cast<int>(a.weights.w2));
      return buf;
    }
  }
  return "?";
}

Action schedule_decision(const SchedulerState& s) {
  for (double v : {s.d1_loss, s.d2_loss, s.g1_loss, s.g2_loss}) {
    if (std::isnan(v)) throw NumericError("scheduler: NaN loss estimate; training is diverging");
  }
  const double tau = s.tau;
  if (s.d1_loss > tau || s.d2_loss > tau) {
    return s.d1_loss > s.d2_loss ? Action::d1() : Action::d2();
  }
  const bool g1_high = s.g1_loss > tau, g2_high = s.g2_loss > tau;
  if (g1_high && g2_high) return Action::g(1, 1);
  if (g1_high) return Action::g(1, 0);
  if (g2_high) return s.literal_final_branch ? Action::g(1, 0) : Action::g(0, 1);
  return Action::both_d();
}

// ---------------------------------------------------------------------------
// Config and metrics

std::string to_string(TrainMode m) { return m == TrainMode::controlled ? "controlled" : "classic"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "controlled") return TrainMode::controlled;
  if (s == "classic") return TrainMode::classic;
  throw std::invalid_argument("unknown training mode '" + s + "' (expected controlled or classic)");
}

void TrainConfig::validate() const {
  preset.validate();
  if (pack != 4 && pack != 1) throw std::invalid_argument("train: pack must be 4 or 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
  if (pack == 4 && batch_size % 4 != 0) {
    throw std::invalid_argument("train: batch_size must be a multiple of 4 (>= 4) when Critic2 packs 2x2");
  }
  if (max_steps < 0) throw std::invalid_argument("train: max_steps must be non-negative");
  if (!(clip_bound > 0.0f)) throw std::invalid_argument("train: clip_bound must be positive");
  if (!(mismatch_ratio >= 0.0 && mismatch_ratio <= 1.0)) throw std::invalid_argument("train: mismatch_ratio in [0,1]");
  if (!(ema >= 0.0 && ema < 1.0)) throw std::invalid_argument("train: ema must lie in [0,1)");
  if (!std::isfinite(tau)) throw std::invalid_argument("train: tau must be finite");
}

std::string metrics_header() { return "step,mode,branch,d1_loss,d2_loss,g1_loss,g2_loss,w1,w2,wall_ms"; }

std::string metrics_line(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%s,%s,%.9g,%.9g,%.9g,%.9g,%g,%g,%.3f", static_cast<long long>(r.step),
                r.mode.c_str(), r.branch.c_str(), r.d1_loss, r.d2_loss, r.g1_loss, r.g2_loss, r.w1, r.w2, r.wall_ms);
  return buf;
}

// ---------------------------------------------------------------------------
// Trainer

struct Trainer::Forward {
  std::unique_ptr<Tape> gen_tape;
  Var generated;
  std::unique_ptr<Tape> critic_tape;
  Var generated_leaf;
  Var d1, d2, g1, g2;

  StepLosses losses() const {
    return {d1.value()[0], d2.value()[0], g1.value()[0], g2.value()[0]};
  }
};

Trainer::Trainer(TrainConfig config, Network encoder, const Manifest& manifest, const ImageStore& store)
    : config_((config.validate(), config)),
      gen_{std::move(encoder), build_decoder(config_.preset, derive_seed(config_.seed, {0xdec}),
                                             NetworkOptions{config_.decoder_batch_norm, config_.pack, 0})},
      critic1_(build_critic1(config_.preset, derive_seed(config_.seed, {0xc1}))),
      critic2_(build_critic2(config_.preset, derive_seed(config_.seed, {0xc2}), NetworkOptions{false, config_.pack, 0})),
      critic1_opt_(config_.critic_optimizer),
      critic2_opt_(config_.critic_optimizer),
      generator_opt_(config_.generator_optimizer),
      store_(&store),
      stream_(manifest, derive_seed(config_.seed, {0x9a17})),
      identity_ids_(manifest.identities()) {
  if (gen_.encoder.kind() != NetworkKind::encoder || !(gen_.encoder.preset() == config_.preset)) {
    throw std::invalid_argument("trainer: encoder does not match the configured preset");
  }
  if (store.resolution() != config_.preset.resolution) {
    throw std::invalid_argument("trainer: images are " + std::to_string(store.resolution()) + " px, preset expects " +
                                std::to_string(config_.preset.resolution));
  }
  if (identity_ids_.size() < 2) throw std::invalid_argument("trainer: need at least 2 identities");
  gen_.encoder.set_frozen(true);
  clip_params(critic1_.parameters(), config_.clip_bound);
  clip_params(critic2_.parameters(), config_.clip_bound);
  for (auto* p : critic1_.parameters()) p->clip_bound = config_.clip_bound;
  for (auto* p : critic2_.parameters()) p->clip_bound = config_.clip_bound;

  // The encoder is frozen, so profile embeddings are computed once.
  embedding_cache_.resize(store.size());
  std::vector<std::size_t> profiles;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (!manifest.is_frontal(manifest.records[i])) profiles.push_back(i);
  }
  constexpr std::size_t chunk = 32;
  for (std::size_t b = 0; b < profiles.size(); b += chunk) {
    std::vector<std::size_t> ids(profiles.begin() + static_cast<std::ptrdiff_t>(b),
                                 profiles.begin() + static_cast<std::ptrdiff_t>(std::min(profiles.size(), b + chunk)));
    Tensor emb = gen_.encode(store.gather(ids));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      embedding_cache_[ids[i]] = slice_leading(emb, static_cast<std::int64_t>(i), static_cast<std::int64_t>(i) + 1)
                                     .reshaped({config_.preset.embedding_dim});
    }
  }
  state_.tau = config_.tau;
  state_.literal_final_branch = config_.literal_final_branch;
}

TrainingBatch Trainer::batch_for_step(std::int64_t step) const {
  TrainingBatch b;
  const int B = config_.batch_size;
  b.pairs = make_batch(stream_, *store_, static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(B), B);
  std::vector<Tensor> emb;
  std::vector<std::size_t> mismatched;
  for (int i = 0; i < B; ++i) {
    emb.push_back(embedding_cache_.at(b.pairs.profile_records[static_cast<std::size_t>(i)]));
    Rng rng(derive_seed(config_.seed, {0x5a5a, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i)}));
    const int own = b.pairs.identity_ids[static_cast<std::size_t>(i)];
    std::vector<int> others;
    for (int id : identity_ids_) {
      if (id != own) others.push_back(id);
    }
    const int other = others[static_cast<std::size_t>(rng.below(others.size()))];
    const auto& fr = stream_.frontals_of(other);
    mismatched.push_back(fr[static_cast<std::size_t>(rng.below(fr.size()))]);
  }
  b.embeddings = stack<float>(emb);
  b.mismatched_frontals = store_->gather(mismatched);
  return b;
}

Trainer::Forward Trainer::forward(const TrainingBatch& batch) {
  Forward f;
  f.gen_tape = std::make_unique<Tape>();
  f.generated = gen_.decode(*f.gen_tape, batch.embeddings, true);
  rescore_critics(f, batch);
  return f;
}

void Trainer::rescore_critics(Forward& f, const TrainingBatch& batch) {
  f.critic_tape = std::make_unique<Tape>();
  Tape& t = *f.critic_tape;
  const std::int64_t B = batch.pairs.profiles.dim(0);
  const std::int64_t n_mis = std::llround(config_.mismatch_ratio * static_cast<double>(B));
  const std::int64_t n_gen_fake = B - n_mis;

  Var gen = t.variable(f.generated.value());
  f.generated_leaf = gen;
  Var prof = t.constant(batch.pairs.profiles);
  Var real = t.constant(batch.pairs.frontals);

  // Critic1 in one pass over [real pairs | generated pairs | mismatched pairs].
  Var profiles = concat_batch(prof, prof);
  Var candidates = concat_batch(real, gen);
  if (n_mis > 0) {
    profiles = concat_batch(profiles, t.constant(slice_leading(batch.pairs.profiles, 0, n_mis)));
    candidates = concat_batch(candidates, t.constant(slice_leading(batch.mismatched_frontals, 0, n_mis)));
  }
  Var s1 = critic1_score(critic1_, profiles, candidates, true);
  Var real1 = slice_batch(s1, 0, B);
  Var gen1 = slice_batch(s1, B, 2 * B);
  Var fake1;
  if (n_mis == 0) {
    fake1 = gen1;
  } else if (n_gen_fake == 0) {
    fake1 = slice_batch(s1, 2 * B, 2 * B + n_mis);
  } else {
    fake1 = concat_batch(slice_batch(s1, B, B + n_gen_fake), slice_batch(s1, 2 * B, 2 * B + n_mis));
  }
  f.d1 = critic_loss(real1, fake1);
  f.g1 = generator_partial_loss(gen1);

  Var real2 = config_.pack == 4 ? pack_quartets(real) : real;
  Var fake2 = config_.pack == 4 ? pack_quartets(gen) : gen;
  const std::int64_t m = real2.shape()[0];
  Var s2 = critic2_score(critic2_, concat_batch(real2, fake2), true);
  Var fake2s = slice_batch(s2, m, 2 * m);
  f.d2 = critic_loss(slice_batch(s2, 0, m), fake2s);
  f.g2 = generator_partial_loss(fake2s);
}

void Trainer::update_critic(Network& net, Optimizer& opt, Forward& f, int which) {
  auto params = net.parameters();
  zero_grads(params);
  f.critic_tape->backward(which == 1 ? f.d1 : f.d2);
  opt.step(params);
  clip_params(params, config_.clip_bound);
}

void Trainer::update_generator(Forward& f, LossWeights w) {
  Tape& t = *f.critic_tape;
  t.exclude(critic1_.parameters());
  t.exclude(critic2_.parameters());
  Var loss;
  if (w.w1 != 0.0f) loss = scale(f.g1, w.w1);
  if (w.w2 != 0.0f) loss = loss.valid() ? add(loss, scale(f.g2, w.w2)) : scale(f.g2, w.w2);
  if (!loss.valid()) return;
  t.backward(loss);
  auto params = gen_.decoder.parameters();
  zero_grads(params);
  f.gen_tape->backward(f.generated, f.generated_leaf.grad());
  generator_opt_.step(params);
}

void Trainer::absorb(const StepLosses& l) {
  for (double v : {l.d1, l.d2, l.g1, l.g2}) {
    if (!std::isfinite(v)) throw NumericError("step " + std::to_string(step_) + ": non-finite loss");
  }
  const double a = state_initialized_ ? config_.ema : 0.0;
  state_.d1_loss = a * state_.d1_loss + (1.0 - a) * l.d1;
  state_.d2_loss = a * state_.d2_loss + (1.0 - a) * l.d2;
  state_.g1_loss = a * state_.g1_loss + (1.0 - a) * l.g1;
  state_.g2_loss = a * state_.g2_loss + (1.0 - a) * l.g2;
  state_initialized_ = true;
}

MetricsRow Trainer::make_row(const Action& a, const StepLosses& l, double ms) const {
  MetricsRow r;
  r.step = step_;
  r.mode = to_string(config_.mode);
  r.branch = branch_name(a);
  r.d1_loss = l.d1;
  r.d2_loss = l.d2;
  r.g1_loss = l.g1;
  r.g2_loss = l.g2;
  r.w1 = a.weights.w1;
  r.w2 = a.weights.w2;
  r.wall_ms = ms;
  return r;
}

MetricsRow Trainer::step() {
  auto batch = batch_for_step(step_);
  return config_.mode == TrainMode::controlled ? train_step(batch) : classic_alternate_step(batch);
}

MetricsRow Trainer::train_step(const TrainingBatch& batch) {
  const auto t0 = std::chrono::steady_clock::now();
  Forward f = forward(batch);
  const StepLosses l = f.losses();
  absorb(l);
  const Action a = schedule_decision(state_);
  execute(a, f, batch);
  return finish(a, l, t0);
}

MetricsRow Trainer::apply(const Action& action, const TrainingBatch& batch) {
  const auto t0 = std::chrono::steady_clock::now();
  Forward f = forward(batch);
  const StepLosses l = f.losses();
  absorb(l);
  execute(action, f, batch);
  return finish(action, l, t0);
}

void Trainer::execute(const Action& a, Forward& f, const TrainingBatch& batch) {
  switch (a.kind) {
    case ActionKind::train_d1: update_critic(critic1_, critic1_opt_, f, 1); break;
    case ActionKind::train_d2: update_critic(critic2_, critic2_opt_, f, 2); break;
    case ActionKind::train_both_d: update_both_critics(f); break;
    case ActionKind::train_g: update_generator(f, a.weights); break;
    case ActionKind::classic:
      update_both_critics(f);
      // The generator answers the updated critics.
      rescore_critics(f, batch);
      update_generator(f, {1.0f, 1.0f});
      break;
  }
  state_.last_action = a;
}

void Trainer::update_both_critics(Forward& f) {
  // One backward serves both: the two critic losses share no parameters.
  zero_grads(critic1_.parameters());
  zero_grads(critic2_.parameters());
  f.critic_tape->backward(add(f.d1, f.d2));
  critic1_opt_.step(critic1_.parameters());
  clip_params(critic1_.parameters(), config_.clip_bound);
  critic2_opt_.step(critic2_.parameters());
  clip_params(critic2_.parameters(), config_.clip_bound);
}

MetricsRow Trainer::finish(const Action& a, const StepLosses& l, std::chrono::steady_clock::time_point t0) {
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  auto row = make_row(a, l, ms);
  ++step_;
  return row;
}

MetricsRow Trainer::classic_alternate_step(const TrainingBatch& batch) {
  return apply(Action{ActionKind::classic, {1.0f, 1.0f}}, batch);
}

StepLosses Trainer::evaluate(const TrainingBatch& batch) { return forward(batch).losses(); }

// ---------------------------------------------------------------------------
// Checkpointing

namespace {

int action_code(const Action& a) {
  if (a.kind == ActionKind::train_g) return 10 + static_cast<int>(a.weights.w1) * 2 + static_cast<int>(a.weights.w2);
  return static_cast<int>(a.kind);
}

Action action_from_code(int c) {
  if (c >= 10) return Action::g(static_cast<float>((c - 10) / 2), static_cast<float>((c - 10) % 2));
  if (c == static_cast<int>(ActionKind::classic)) return {ActionKind::classic, {1, 1}};
  return {static_cast<ActionKind>(c), {0, 0}};
}

void store_optimizer(Checkpoint& ckpt, const Optimizer& opt) {
  for (const auto& [name, t] : opt.state()) ckpt.put("opt/" + name, t);
}

void restore_optimizer(const Checkpoint& ckpt, Optimizer& opt, Network& net) {
  opt.state().clear();
  for (const auto* p : net.parameters()) {
    if (ckpt.has("opt/" + p->name)) opt.state()[p->name] = ckpt.get("opt/" + p->name);
  }
}

}  // namespace

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.set_preset(config_.preset);
  c.meta["kind"] = "training";
  c.meta["step"] = std::to_string(step_);
  c.meta["mode"] = to_string(config_.mode);
  c.meta["pack"] = std::to_string(config_.pack);
  c.meta["seed"] = std::to_string(config_.seed);
  c.meta["batch_size"] = std::to_string(config_.batch_size);
  c.meta["state.initialized"] = state_initialized_ ? "1" : "0";
  c.meta["state.d1_loss"] = encode_double(state_.d1_loss);
  c.meta["state.d2_loss"] = encode_double(state_.d2_loss);
  c.meta["state.g1_loss"] = encode_double(state_.g1_loss);
  c.meta["state.g2_loss"] = encode_double(state_.g2_loss);
  c.meta["state.last_action"] = std::to_string(action_code(state_.last_action));
  store_network(c, gen_.encoder);
  store_network(c, gen_.decoder);
  store_network(c, critic1_);
  store_network(c, critic2_);
  store_optimizer(c, generator_opt_);
  store_optimizer(c, critic1_opt_);
  store_optimizer(c, critic2_opt_);
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  if (c.meta_at("kind") != "training") throw CheckpointError("checkpoint: not a training checkpoint");
  if (c.meta_at("mode") != to_string(config_.mode) || std::stoi(c.meta_at("pack")) != config_.pack ||
      std::stoull(c.meta_at("seed")) != config_.seed || std::stoi(c.meta_at("batch_size")) != config_.batch_size) {
    throw CheckpointError("checkpoint: mode/pack/seed/batch_size differ from the run configuration");
  }
  restore_network(c, gen_.decoder);
  restore_network(c, critic1_);
  restore_network(c, critic2_);
  for (const auto* p : gen_.encoder.parameters()) {
    if (!(c.get(p->name) == p->value)) throw CheckpointError("checkpoint: encoder differs from the supplied encoder");
  }
  restore_optimizer(c, generator_opt_, gen_.decoder);
  restore_optimizer(c, critic1_opt_, critic1_);
  restore_optimizer(c, critic2_opt_, critic2_);
  step_ = std::stoll(c.meta_at("step"));
  state_initialized_ = c.meta_at("state.initialized") == "1";
  state_.d1_loss = decode_double(c.meta_at("state.d1_loss"));
  state_.d2_loss = decode_double(c.meta_at("state.d2_loss"));
  state_.g1_loss = decode_double(c.meta_at("state.g1_loss"));
  state_.g2_loss = decode_double(c.meta_at("state.g2_loss"));
  state_.last_action = action_from_code(std::stoi(c.meta_at("state.last_action")));
}

// ---------------------------------------------------------------------------
// Identity classification

ClassifierResult train_classifier(const ScalePreset& preset, const Manifest& manifest, const ImageStore& store,
                                  const std::vector<std::size_t>& records, const PretrainConfig& config) {
  std::vector<int> classes;
  for (auto r : records) classes.push_back(manifest.records.at(r).identity_id);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw std::invalid_argument("classifier: need at least 2 identities, got " + std::to_string(classes.size()));
  }
  if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("classifier: bad epoch/batch config");
  if (store.resolution() != preset.resolution) throw std::invalid_argument("classifier: image resolution mismatch");
  auto label_of = [&](std::size_t r) {
    const int id = manifest.records[r].identity_id;
    return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), id) - classes.begin());
  };

  ClassifierResult out{build_encoder(preset, derive_seed(config.seed, {0xe1c})),
                       build_classifier_head(preset, static_cast<int>(classes.size()), derive_seed(config.seed, {0x4ead})),
                       classes, 0.0, 0.0, records};
  Optimizer opt(OptimizerConfig{OptimizerKind::rmsprop, config.lr});
  std::vector<Parameter*> params = out.encoder.parameters();
  for (auto* p : out.head.parameters()) params.push_back(p);

  std::vector<std::size_t> order = records;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {0xc1a5, static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min(order.size(), b + static_cast<std::size_t>(config.batch_size))));
      std::vector<int> labels;
      for (auto r : ids) labels.push_back(label_of(r));
      Tape tape;
      Var emb = out.encoder.forward(tape.constant(store.gather(ids)), true);
      Var loss = softmax_cross_entropy(out.head.forward(emb, true), labels);
      zero_grads(params);
      tape.backward(loss);
      opt.step(params);
      epoch_loss += loss.value()[0];
      ++batches;
    }
    out.final_loss = epoch_loss / batches;
  }

  std::size_t correct = 0;
  for (std::size_t b = 0; b < records.size(); b += 32) {
    std::vector<std::size_t> ids(records.begin() + static_cast<std::ptrdiff_t>(b),
                                 records.begin() + static_cast<std::ptrdiff_t>(std::min(records.size(), b + 32)));
    Tensor logits = out.head.infer(out.encoder.infer(store.gather(ids)));
    const std::int64_t k = logits.dim(1);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const float* row = logits.data() + static_cast<std::int64_t>(i) * k;
      if (std::max_element(row, row + k) - row == label_of(ids[i])) ++correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  return out;
}

PretrainResult pretrain_encoder(const ScalePreset& preset, const Manifest& manifest, const ImageStore& store,
                                const PretrainConfig& config) {
  std::vector<std::size_t> records;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const bool frontal = manifest.is_frontal(manifest.records[i]);
    if ((frontal && config.use_frontals) || (!frontal && config.use_profiles)) records.push_back(i);
  }
  auto result = train_classifier(preset, manifest, store, records, config);
  result.encoder.set_frozen(true);
  return {std::move(result.encoder), result.accuracy};
}

}  // namespace dualgan
