#include "dualgan/config.hpp"

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dualgan/rng.hpp"

namespace dualgan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config: " + key + " = '" + value + "' is not " + expected);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "an integer");
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a number");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> to_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(to_real(key, tok));
  }
  return out;
}

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string reals(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + real(x);
  return s;
}

const char* boolean(bool b) { return b ? "true" : "false"; }

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.train.max_steps = 4000;
  c.train.critic_optimizer.lr = 1e-3;
  c.train.generator_optimizer.lr = 1e-3;
  c.train.tau = -0.03;
  c.classifier.epochs = 200;
  return c;
}

void RunConfig::set(const std::string& key, const std::string& v) {
  if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) bad_value(key, v, "a non-negative integer");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "preset") {
    if (v == "desk") preset = ScalePreset::desk();
    else if (v == "reference") preset = ScalePreset::reference();
    else bad_value(key, v, "desk or reference");
  } else if (key == "preset.resolution") {
    preset.resolution = static_cast<int>(to_int(key, v));
  } else if (key == "preset.channel_divisor") {
    preset.channel_divisor = static_cast<int>(to_int(key, v));
  } else if (key == "preset.embedding_dim") {
    preset.embedding_dim = static_cast<int>(to_int(key, v));
  } else if (key == "frontal_threshold") {
    frontal_threshold = to_real(key, v);
  } else if (key == "wall_clock") {
    wall_clock = to_bool(key, v);
  } else if (key == "synth.identities") {
    synth.num_identities = static_cast<int>(to_int(key, v));
  } else if (key == "synth.poses") {
    synth.poses_per_identity = to_reals(key, v);
  } else if (key == "synth.test_poses") {
    synth.test_poses = to_reals(key, v);
  } else if (key == "pretrain.epochs") {
    pretrain.epochs = static_cast<int>(to_int(key, v));
  } else if (key == "pretrain.lr") {
    pretrain.lr = to_real(key, v);
  } else if (key == "pretrain.batch_size") {
    pretrain.batch_size = static_cast<int>(to_int(key, v));
  } else if (key == "pretrain.use_profiles") {
    pretrain.use_profiles = to_bool(key, v);
  } else if (key == "pretrain.use_frontals") {
    pretrain.use_frontals = to_bool(key, v);
  } else if (key == "classifier.epochs") {
    classifier.epochs = static_cast<int>(to_int(key, v));
  } else if (key == "classifier.lr") {
    classifier.lr = to_real(key, v);
  } else if (key == "classifier.batch_size") {
    classifier.batch_size = static_cast<int>(to_int(key, v));
  } else if (key == "train.batch_size") {
    train.batch_size = static_cast<int>(to_int(key, v));
  } else if (key == "train.max_steps") {
    train.max_steps = to_int(key, v);
  } else if (key == "train.clip_bound") {
    train.clip_bound = static_cast<float>(to_real(key, v));
  } else if (key == "train.optimizer") {
    try {
      train.critic_optimizer.kind = train.generator_optimizer.kind = parse_optimizer_kind(v);
    } catch (const std::invalid_argument&) {
      bad_value(key, v, "rmsprop or sgd");
    }
  } else if (key == "train.critic_lr") {
    train.critic_optimizer.lr = to_real(key, v);
  } else if (key == "train.generator_lr") {
    train.generator_optimizer.lr = to_real(key, v);
  } else if (key == "train.rho") {
    train.critic_optimizer.rho = train.generator_optimizer.rho = to_real(key, v);
  } else if (key == "train.epsilon") {
    train.critic_optimizer.epsilon = train.generator_optimizer.epsilon = to_real(key, v);
  } else if (key == "train.mismatch_ratio") {
    train.mismatch_ratio = to_real(key, v);
  } else if (key == "train.tau") {
    train.tau = to_real(key, v);
  } else if (key == "train.mode") {
    try {
      train.mode = parse_train_mode(v);
    } catch (const std::invalid_argument&) {
      bad_value(key, v, "controlled or classic");
    }
  } else if (key == "train.pack") {
    train.pack = static_cast<int>(to_int(key, v));
  } else if (key == "train.ema") {
    train.ema = to_real(key, v);
  } else if (key == "train.decoder_batch_norm") {
    train.decoder_batch_norm = to_bool(key, v);
  } else if (key == "train.literal_final_branch") {
    train.literal_final_branch = to_bool(key, v);
  } else if (key == "train.checkpoint_every") {
    checkpoint_every = to_int(key, v);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void RunConfig::finalize() {
  preset.validate();
  if (!(frontal_threshold >= 0.0 && frontal_threshold < 90.0)) {
    throw ConfigError("config: frontal_threshold must lie in [0,90)");
  }
  if (checkpoint_every < 0) throw ConfigError("config: train.checkpoint_every must be non-negative");
  synth.seed = seed;
  synth.resolution = preset.resolution;
  pretrain.seed = seed;
  classifier.seed = derive_seed(seed, {0xc1a551f1});
  train.seed = seed;
  train.preset = preset;
  synth.validate();
  train.validate();
  for (const auto* p : {&pretrain, &classifier}) {
    if (p->epochs < 1 || p->batch_size < 1 || !(p->lr > 0.0)) {
      throw ConfigError("config: pretrain/classifier epochs, batch_size and lr must be positive");
    }
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o << "seed = " << seed << "\n";
  o << "preset.resolution = " << preset.resolution << "\n";
  o << "preset.channel_divisor = " << preset.channel_divisor << "\n";
  o << "preset.embedding_dim = " << preset.embedding_dim << "\n";
  o << "frontal_threshold = " << real(frontal_threshold) << "\n";
  o << "wall_clock = " << boolean(wall_clock) << "\n";
  o << "synth.identities = " << synth.num_identities << "\n";
  o << "synth.poses = " << reals(synth.poses_per_identity) << "\n";
  o << "synth.test_poses = " << reals(synth.test_poses) << "\n";
  o << "pretrain.epochs = " << pretrain.epochs << "\n";
  o << "pretrain.lr = " << real(pretrain.lr) << "\n";
  o << "pretrain.batch_size = " << pretrain.batch_size << "\n";
  o << "pretrain.use_profiles = " << boolean(pretrain.use_profiles) << "\n";
  o << "pretrain.use_frontals = " << boolean(pretrain.use_frontals) << "\n";
  o << "classifier.epochs = " << classifier.epochs << "\n";
  o << "classifier.lr = " << real(classifier.lr) << "\n";
  o << "classifier.batch_size = " << classifier.batch_size << "\n";
  o << "train.batch_size = " << train.batch_size << "\n";
  o << "train.max_steps = " << train.max_steps << "\n";
  o << "train.clip_bound = " << real(train.clip_bound) << "\n";
  o << "train.optimizer = " << to_string(train.critic_optimizer.kind) << "\n";
  o << "train.critic_lr = " << real(train.critic_optimizer.lr) << "\n";
  o << "train.generator_lr = " << real(train.generator_optimizer.lr) << "\n";
  o << "train.rho = " << real(train.critic_optimizer.rho) << "\n";
  o << "train.epsilon = " << real(train.critic_optimizer.epsilon) << "\n";
  o << "train.mismatch_ratio = " << real(train.mismatch_ratio) << "\n";
  o << "train.tau = " << real(train.tau) << "\n";
  o << "train.mode = " << to_string(train.mode) << "\n";
  o << "train.pack = " << train.pack << "\n";
  o << "train.ema = " << real(train.ema) << "\n";
  o << "train.decoder_batch_norm = " << boolean(train.decoder_batch_norm) << "\n";
  o << "train.literal_final_branch = " << boolean(train.literal_final_branch) << "\n";
  o << "train.checkpoint_every = " << checkpoint_every << "\n";
  return o.str();
}

std::vector<std::pair<std::string, std::string>> parse_assignments(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_assignments(RunConfig& config, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) config.set(k, v);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = RunConfig::desk();
  apply_assignments(c, parse_assignments(ss.str()));
  return c;
}

}  // namespace dualgan
