#include "dualgan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

namespace dualgan {

SeedSetup prepare_seed(const RunConfig& config_in, const std::filesystem::path& dir) {
  RunConfig config = config_in;
  config.finalize();
  Manifest manifest = synth_generate(config.synth, dir);
  manifest.frontal_threshold_degrees = config.frontal_threshold;
  manifest.validate();
  auto store = std::make_unique<ImageStore>(manifest);
  auto pre = pretrain_encoder(config.preset, manifest, *store, config.pretrain);
  auto classifier = train_identity_classifier(config.preset, manifest, *store, config.classifier);
  return SeedSetup{config, std::move(manifest), std::move(store), std::move(pre.encoder), pre.accuracy,
                   std::move(classifier)};
}

double final_generator_loss(const std::vector<MetricsRow>& metrics, std::size_t window) {
  if (metrics.empty()) throw std::invalid_argument("final_generator_loss: no metrics");
  const std::size_t n = std::min(window, metrics.size());
  double s = 0.0;
  for (std::size_t i = metrics.size() - n; i < metrics.size(); ++i) s += metrics[i].g1_loss + metrics[i].g2_loss;
  return s / static_cast<double>(n);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

RunOutcome run_training(SeedSetup& setup, TrainConfig train, const std::string& label, const StepObserver& observer) {
  const auto t0 = std::chrono::steady_clock::now();
  train.seed = setup.config.seed;
  train.preset = setup.config.preset;
  Trainer trainer(train, setup.encoder, setup.manifest, *setup.store);
  RunOutcome out;
  out.label = label;
  out.metrics.reserve(static_cast<std::size_t>(train.max_steps));
  while (trainer.step_index() < train.max_steps) {
    out.metrics.push_back(trainer.step());
    if (!setup.config.wall_clock) out.metrics.back().wall_ms = 0.0;
    if (observer) observer(out.metrics.back(), trainer);
  }
  out.report = fooling_rate(generator_fn(trainer.generator()), setup.classifier, setup.manifest, *setup.store,
                            probe_records(setup.manifest));
  if (!out.metrics.empty()) out.final_generator_loss = final_generator_loss(out.metrics);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ComparisonSummary compare_modes(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::filesystem::path& work_dir,
                                const std::function<void(const std::string&)>& log) {
  ComparisonSummary s;
  std::vector<double> fool, cov, g_ctl, g_cls, cov4, cov1, chance;
  for (auto seed : seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    SeedSetup setup = prepare_seed(cfg, work_dir / ("seed" + std::to_string(seed)));
    const auto emit = [&](const RunOutcome& r) {
      std::ofstream csv(work_dir / ("seed" + std::to_string(seed)) / (r.label + "_metrics.csv"));
      csv << metrics_header() << "\n";
      for (const auto& m : r.metrics) csv << metrics_line(m) << "\n";
      if (log) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "seed %llu %-10s fooling %.4f modes %d final_g %.5f (%.1fs)",
                      static_cast<unsigned long long>(seed), r.label.c_str(), r.report.fooling_rate,
                      r.report.modes_covered, r.final_generator_loss, r.seconds);
        log(buf);
      }
    };
    ComparisonRow row;
    row.seed = seed;
    TrainConfig t = setup.config.train;
    t.mode = TrainMode::controlled;
    t.pack = 4;
    row.controlled = run_training(setup, t, "controlled");
    emit(row.controlled);
    t.mode = TrainMode::classic;
    row.classic = run_training(setup, t, "classic");
    emit(row.classic);
    t.mode = TrainMode::controlled;
    t.pack = 1;
    row.pack1 = run_training(setup, t, "pack1");
    emit(row.pack1);
    row.chance_fooling = fooling_rate(noise_fn(seed), setup.classifier, setup.manifest, *setup.store,
                                      probe_records(setup.manifest))
                             .fooling_rate;
    fool.push_back(row.controlled.report.fooling_rate);
    cov.push_back(row.controlled.report.modes_covered);
    g_ctl.push_back(row.controlled.final_generator_loss);
    g_cls.push_back(row.classic.final_generator_loss);
    cov4.push_back(row.controlled.report.modes_covered);
    cov1.push_back(row.pack1.report.modes_covered);
    chance.push_back(row.chance_fooling);
    s.rows.push_back(std::move(row));
  }
  s.median_fooling_controlled = median(fool);
  s.median_coverage_controlled = median(cov);
  s.median_final_g_controlled = median(g_ctl);
  s.median_final_g_classic = median(g_cls);
  s.median_coverage_pack4 = median(cov4);
  s.median_coverage_pack1 = median(cov1);
  s.median_chance_fooling = median(chance);
  return s;
}

std::string summary_json(const ComparisonSummary& s) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : s.rows) {
    nlohmann::ordered_json row;
    row["seed"] = r.seed;
    for (const auto* run : {&r.controlled, &r.classic, &r.pack1}) {
      nlohmann::ordered_json o;
      o["fooling_rate"] = run->report.fooling_rate;
      o["modes_covered"] = run->report.modes_covered;
      o["final_generator_loss"] = run->final_generator_loss;
      o["seconds"] = run->seconds;
      row[run->label] = o;
    }
    row["chance_fooling_rate"] = r.chance_fooling;
    rows.push_back(row);
  }
  j["runs"] = rows;
  j["median_fooling_controlled"] = s.median_fooling_controlled;
  j["median_coverage_controlled"] = s.median_coverage_controlled;
  j["median_final_g_controlled"] = s.median_final_g_controlled;
  j["median_final_g_classic"] = s.median_final_g_classic;
  j["median_coverage_pack4"] = s.median_coverage_pack4;
  j["median_coverage_pack1"] = s.median_coverage_pack1;
  j["median_chance_fooling"] = s.median_chance_fooling;
  return j.dump(2);
}

}  // namespace dualgan
