#include <doctest.h>

#include <fstream>

#include "dualgan/rng.hpp"
#include "suites.hpp"

using namespace dualgan;

TEST_CASE("desk defaults") {
  RunConfig c = RunConfig::desk();
  c.finalize();
  CHECK(c.preset == ScalePreset::desk());
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.clip_bound == 0.01f);
  CHECK(c.train.pack == 4);
  CHECK(c.train.mode == TrainMode::controlled);
  CHECK(c.train.mismatch_ratio == 0.5);
  CHECK(c.synth.num_identities == 16);
  CHECK_FALSE(c.wall_clock);
  // The library-level scheduler default keeps the published threshold.
  CHECK(TrainConfig{}.tau == -0.8);
}

TEST_CASE("one seed drives every component") {
  RunConfig c = RunConfig::desk();
  c.set("seed", "42");
  c.finalize();
  CHECK(c.synth.seed == 42);
  CHECK(c.pretrain.seed == 42);
  CHECK(c.train.seed == 42);
  CHECK(c.classifier.seed == derive_seed(42, {0xc1a551f1}));
  CHECK(c.train.preset == c.preset);
  CHECK(c.synth.resolution == c.preset.resolution);
}

TEST_CASE("assignments parse with comments and whitespace") {
  const auto kv = parse_assignments("# header\n seed = 3 \n\ntrain.tau=-0.5 # trailing\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"seed", "3"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"train.tau", "-0.5"});
  CHECK_THROWS_WITH_AS(parse_assignments("seed 3\n"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_AS(parse_assignments("= 3\n"), ConfigError);
}

TEST_CASE("set validates keys and values") {
  RunConfig c = RunConfig::desk();
  CHECK_THROWS_WITH_AS(c.set("train.bogus", "1"), doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_AS(c.set("seed", "x"), ConfigError);
  CHECK_THROWS_AS(c.set("seed", "-1"), ConfigError);
  CHECK_THROWS_AS(c.set("train.tau", "1.0.0"), ConfigError);
  CHECK_THROWS_AS(c.set("wall_clock", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.set("train.mode", "both"), ConfigError);
  CHECK_THROWS_AS(c.set("preset", "huge"), ConfigError);
  CHECK_THROWS_AS(c.set("train.optimizer", "adam"), ConfigError);
  c.set("train.optimizer", "sgd");
  CHECK(c.train.critic_optimizer.kind == OptimizerKind::sgd);
  c.set("synth.poses", "0, 45, -45");
  CHECK(c.synth.poses_per_identity == std::vector<double>{0, 45, -45});
  c.set("preset", "reference");
  CHECK(c.preset == ScalePreset::reference());
}

TEST_CASE("finalize rejects inconsistent settings") {
  RunConfig c = RunConfig::desk();
  c.set("train.batch_size", "10");
  CHECK_THROWS(c.finalize());
  c = RunConfig::desk();
  c.set("preset.resolution", "40");
  CHECK_THROWS(c.finalize());
  c = RunConfig::desk();
  c.set("frontal_threshold", "95");
  CHECK_THROWS(c.finalize());
  c = RunConfig::desk();
  c.set("pretrain.epochs", "0");
  CHECK_THROWS(c.finalize());
  c = RunConfig::desk();
  c.set("synth.poses", "30,60");
  CHECK_THROWS(c.finalize());
}

TEST_CASE("resolved text reloads to the same configuration") {
  RunConfig c = RunConfig::desk();
  apply_assignments(c, parse_assignments("seed = 9\ntrain.tau = -0.125\ntrain.pack = 1\nsynth.test_poses = 60\n"
                                         "train.critic_lr = 0.0003\nwall_clock = true\n"));
  c.finalize();
  const auto path = testing::scratch_dir("config") / "c.txt";
  std::ofstream(path) << c.to_text();
  RunConfig back = load_config(path);
  back.finalize();
  CHECK(back.to_text() == c.to_text());
  CHECK(back.train.tau == -0.125);
  CHECK(back.train.pack == 1);
  CHECK(back.train.critic_optimizer.lr == 0.0003);
  CHECK(back.synth.test_poses == std::vector<double>{60});
  CHECK(back.wall_clock);
  CHECK_THROWS_AS(load_config(path.parent_path() / "none.txt"), ConfigError);
}
