// Command-line entry point: synth, pretrain, train, generate, eval, compare.
//
// Exit codes: 0 success, 2 usage or validation error, 3 runtime or numeric
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dualgan/config.hpp"
#include "dualgan/eval.hpp"
#include "dualgan/experiment.hpp"

namespace fs = std::filesystem;
using namespace dualgan;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Config sources shared by every subcommand.
struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;  // filled by callbacks

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override a config key (key=value); repeatable");
  }

  template <typename V>
  void flag(CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
    cmd->add_option_function<V>(
        name,
        [this, key](const V& v) {
          std::ostringstream o;
          o << v;
          flags.emplace_back(key, o.str());
        },
        help);
  }

  RunConfig resolve() const {
    RunConfig c = config_file.empty() ? RunConfig::desk() : load_config(config_file);
    apply_assignments(c, flags);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    c.finalize();
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void prepare_out(const fs::path& dir, const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  write_text(dir / "resolved_config.txt", config.to_text());
}

Manifest open_manifest(const std::string& data, const RunConfig& config) {
  fs::path p = data;
  if (fs::is_directory(p)) p /= "manifest.csv";
  if (!fs::exists(p)) throw UsageError("manifest not found: " + p.string());
  return load_manifest(p, config.frontal_threshold);
}

Checkpoint open_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  return read_checkpoint(path);
}

Network network_from(const Checkpoint& ckpt, NetworkKind kind, const RunConfig& config) {
  const ScalePreset preset = ckpt.preset();
  Network net = kind == NetworkKind::encoder ? build_encoder(preset, 0)
                                             : build_decoder(preset, 0,
                                                             NetworkOptions{config.train.decoder_batch_norm, 4, 0});
  restore_network(ckpt, net);
  return net;
}

// -- synth -------------------------------------------------------------------

int cmd_synth(const ConfigOptions& opts, const std::string& out) {
  const RunConfig config = opts.resolve();
  prepare_out(out, config);
  const Manifest m = synth_generate(config.synth, out);
  std::printf("wrote %zu images for %d identities to %s\n", m.records.size(), config.synth.num_identities,
              out.c_str());
  return kOk;
}

// -- pretrain ----------------------------------------------------------------

Checkpoint pretrain_checkpoint(const ClassifierResult& r, const PretrainConfig& pc) {
  Checkpoint c = network_checkpoint(r.encoder);
  store_network(c, r.head);
  std::string classes;
  for (int id : r.classes) classes += (classes.empty() ? "" : ",") + std::to_string(id);
  c.meta["classes"] = classes;
  c.meta["pretrain.accuracy"] = encode_double(r.accuracy);
  c.meta["pretrain.use_profiles"] = pc.use_profiles ? "1" : "0";
  c.meta["pretrain.use_frontals"] = pc.use_frontals ? "1" : "0";
  return c;
}

int cmd_pretrain(const ConfigOptions& opts, const std::string& data, const std::string& out) {
  const RunConfig config = opts.resolve();
  const Manifest m = open_manifest(data, config);
  if (m.identities().size() < 2) throw UsageError("pretrain needs at least 2 identities");
  prepare_out(out, config);
  const ImageStore store(m);
  std::vector<std::size_t> records;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const bool frontal = m.is_frontal(m.records[i]);
    if ((frontal && config.pretrain.use_frontals) || (!frontal && config.pretrain.use_profiles)) records.push_back(i);
  }
  auto r = train_classifier(config.preset, m, store, records, config.pretrain);
  write_checkpoint(fs::path(out) / "encoder.ckpt", pretrain_checkpoint(r, config.pretrain));
  std::printf("accuracy %.6f\n", r.accuracy);
  return kOk;
}

// -- train -------------------------------------------------------------------

void write_metrics(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text = metrics_header() + "\n";
  for (const auto& l : lines) text += l + "\n";
  write_text(path, text);
}

std::vector<std::string> read_metrics_until(const fs::path& path, std::int64_t step) {
  std::vector<std::string> kept;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) >= step) break;
    kept.push_back(line);
  }
  if (static_cast<std::int64_t>(kept.size()) != step) {
    throw std::runtime_error("metrics.csv holds " + std::to_string(kept.size()) + " rows before step " +
                             std::to_string(step) + "; cannot resume consistently");
  }
  return kept;
}

int cmd_train(const ConfigOptions& opts, const std::string& data, const std::string& encoder_path,
              const std::string& out, bool resume) {
  const RunConfig config = opts.resolve();
  const Manifest m = open_manifest(data, config);
  const fs::path dir = out;
  const fs::path ckpt_path = dir / "checkpoint.ckpt";
  const fs::path metrics_path = dir / "metrics.csv";

  std::optional<Checkpoint> saved;
  Network encoder = build_encoder(config.preset, 0);
  if (resume) {
    saved = open_checkpoint(ckpt_path.string());
    restore_network(*saved, encoder);
  } else {
    if (encoder_path.empty()) throw UsageError("train needs --encoder (or --resume)");
    const Checkpoint enc = open_checkpoint(encoder_path);
    if (enc.meta_at("kind") != "encoder") throw UsageError(encoder_path + " is not an encoder checkpoint");
    restore_network(enc, encoder);
  }
  prepare_out(dir, config);
  const ImageStore store(m);
  Trainer trainer(config.train, std::move(encoder), m, store);
  std::vector<std::string> lines;
  if (saved) {
    trainer.restore(*saved);
    lines = read_metrics_until(metrics_path, trainer.step_index());
  }
  auto save = [&] {
    write_metrics(metrics_path, lines);
    write_checkpoint(ckpt_path, trainer.checkpoint());
  };
  while (trainer.step_index() < config.train.max_steps) {
    MetricsRow row = trainer.step();
    if (!config.wall_clock) row.wall_ms = 0.0;
    lines.push_back(metrics_line(row));
    if (config.checkpoint_every > 0 && trainer.step_index() % config.checkpoint_every == 0) save();
  }
  save();
  std::printf("trained %lld steps (%s, pack %d); metrics in %s\n", static_cast<long long>(trainer.step_index()),
              to_string(config.train.mode).c_str(), config.train.pack, metrics_path.c_str());
  return kOk;
}

// -- generate ----------------------------------------------------------------

struct LoadedGenerator {
  GeneratorBundle bundle;
  int pack = 4;
};

LoadedGenerator load_generator(const std::string& path, const RunConfig& config) {
  const Checkpoint ckpt = open_checkpoint(path);
  LoadedGenerator g{{network_from(ckpt, NetworkKind::encoder, config), network_from(ckpt, NetworkKind::decoder, config)},
                    ckpt.meta.count("pack") ? std::stoi(ckpt.meta_at("pack")) : 4};
  g.bundle.encoder.set_frozen(true);
  return g;
}

int cmd_generate(const ConfigOptions& opts, const std::string& checkpoint, const std::vector<std::string>& inputs,
                 const std::string& out) {
  const RunConfig config = opts.resolve();
  auto g = load_generator(checkpoint, config);
  const int res = g.bundle.encoder.preset().resolution;
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".png") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      if (!fs::exists(in)) throw UsageError("input not found: " + in);
      files.emplace_back(in);
    }
  }
  if (files.empty()) throw UsageError("generate: no input images");
  prepare_out(out, config);
  for (const auto& f : files) {
    const Image img = read_png(f);
    if (img.width != res || img.height != res) {
      throw UsageError(f.string() + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                       ", the checkpoint expects " + std::to_string(res) + "x" + std::to_string(res));
    }
    write_png(fs::path(out) / f.filename(), denormalize(g.bundle.generate(normalize(img))));
  }
  std::printf("generated %zu frontal images in %s\n", files.size(), out.c_str());
  return kOk;
}

// -- eval --------------------------------------------------------------------

IdentityClassifier classifier_from_pretrain(const Checkpoint& ckpt) {
  std::vector<int> classes;
  std::stringstream ss(ckpt.meta_at("classes"));
  for (std::string tok; std::getline(ss, tok, ',');) classes.push_back(std::stoi(tok));
  const ScalePreset preset = ckpt.preset();
  IdentityClassifier c{build_encoder(preset, 0), build_classifier_head(preset, static_cast<int>(classes.size()), 0),
                       classes, decode_double(ckpt.meta_at("pretrain.accuracy")), {}};
  restore_network(ckpt, c.encoder);
  restore_network(ckpt, c.head);
  return c;
}

int cmd_eval(const ConfigOptions& opts, const std::string& data, const std::string& checkpoint,
             const std::string& classifier_path, const std::string& out, bool chance, int ablate_pack,
             const std::string& pretrain_check, int grid_rows) {
  const RunConfig config = opts.resolve();
  const Manifest m = open_manifest(data, config);
  const ImageStore store(m);

  if (!pretrain_check.empty()) {
    // Recompute the pretraining accuracy through the classifier path.
    const Checkpoint ckpt = open_checkpoint(pretrain_check);
    IdentityClassifier c = classifier_from_pretrain(ckpt);
    const bool prof = ckpt.meta_at("pretrain.use_profiles") == "1", front = ckpt.meta_at("pretrain.use_frontals") == "1";
    std::vector<std::size_t> recs;
    for (std::size_t i = 0; i < m.records.size(); ++i) {
      const bool f = m.is_frontal(m.records[i]);
      if ((f && front) || (!f && prof)) recs.push_back(i);
    }
    const auto predicted = c.predict(store.gather(recs));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) hits += predicted[i] == m.records[recs[i]].identity_id;
    std::printf("pretrain accuracy %.6f (recorded %.6f)\n", static_cast<double>(hits) / recs.size(), c.train_accuracy);
    return kOk;
  }

  if (!chance && checkpoint.empty()) throw UsageError("eval needs --checkpoint or --chance-baseline");
  if (out.empty()) throw UsageError("eval needs --out");
  std::optional<LoadedGenerator> g;
  if (!chance) {
    g = load_generator(checkpoint, config);
    if (ablate_pack != 0 && ablate_pack != g->pack) {
      throw UsageError("--ablate-pack " + std::to_string(ablate_pack) + " requested but the checkpoint was trained with pack " +
                       std::to_string(g->pack));
    }
  }
  prepare_out(out, config);
  IdentityClassifier classifier = [&] {
    if (!classifier_path.empty() && fs::exists(classifier_path)) return restore_classifier(read_checkpoint(classifier_path));
    auto c = train_identity_classifier(config.preset, m, store, config.classifier);
    write_checkpoint(classifier_path.empty() ? fs::path(out) / "classifier.ckpt" : fs::path(classifier_path),
                     classifier_checkpoint(c));
    return c;
  }();
  const GenerateFn gen = chance ? noise_fn(config.seed) : generator_fn(g->bundle);
  const auto probes = probe_records(m);
  EvalReport report = fooling_rate(gen, classifier, m, store, probes);
  write_text(fs::path(out) / "report.json", to_json(report) + "\n");
  std::vector<std::size_t> grid(probes.begin(), probes.begin() + std::min<std::size_t>(probes.size(), grid_rows));
  export_sample_grid(gen, m, store, grid, fs::path(out) / "samples.png");
  std::printf("fooling_rate %.6f\nmodes_covered %d\nnum_samples %d\n", report.fooling_rate, report.modes_covered,
              report.num_samples);
  if (chance) std::printf("chance_level %.6f\n", 1.0 / static_cast<double>(classifier.classes.size()));
  if (g) std::printf("pack %d\n", g->pack);
  return kOk;
}

// -- compare -----------------------------------------------------------------

int cmd_compare(const ConfigOptions& opts, const std::vector<std::uint64_t>& seeds, const std::string& out) {
  const RunConfig config = opts.resolve();
  prepare_out(out, config);
  const auto s = compare_modes(config, seeds, fs::path(out) / "work", [](const std::string& l) {
    std::printf("%s\n", l.c_str());
    std::fflush(stdout);
  });
  write_text(fs::path(out) / "summary.json", summary_json(s) + "\n");
  std::printf("median fooling (controlled) %.4f, chance %.4f\n", s.median_fooling_controlled, s.median_chance_fooling);
  std::printf("median coverage pack4 %.1f, pack1 %.1f\n", s.median_coverage_pack4, s.median_coverage_pack1);
  std::printf("median final g1+g2 controlled %.5f, classic %.5f\n", s.median_final_g_controlled, s.median_final_g_classic);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-critic frontal face GAN: data synthesis, training and evaluation"};
  app.require_subcommand(1);

  ConfigOptions synth_o, pre_o, train_o, gen_o, eval_o, cmp_o;
  std::string out, data, encoder, checkpoint, classifier, pretrain_check;
  std::vector<std::string> inputs;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool resume = false, chance = false;
  int ablate_pack = 0, grid_rows = 8;

  auto* synth = app.add_subcommand("synth", "Render a synthetic paired face dataset");
  synth_o.attach(synth);
  synth_o.flag<int>(synth, "--identities", "synth.identities", "Number of identities");
  synth_o.flag<std::string>(synth, "--poses", "synth.poses", "Comma-separated yaw angles in degrees");
  synth_o.flag<std::string>(synth, "--test-poses", "synth.test_poses", "Poses assigned to the test split");
  synth_o.flag<int>(synth, "--res", "preset.resolution", "Image resolution");
  synth_o.flag<std::uint64_t>(synth, "--seed", "seed", "Seed");
  synth->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Pretrain the encoder on identity classification");
  pre_o.attach(pre);
  pre_o.flag<std::uint64_t>(pre, "--seed", "seed", "Seed");
  pre_o.flag<int>(pre, "--epochs", "pretrain.epochs", "Epochs");
  pre->add_option("--data", data, "Dataset directory or manifest.csv")->required();
  pre->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Adversarial training of the decoder");
  train_o.attach(train);
  train_o.flag<std::uint64_t>(train, "--seed", "seed", "Seed");
  train_o.flag<std::string>(train, "--mode", "train.mode", "controlled or classic");
  train_o.flag<std::int64_t>(train, "--steps", "train.max_steps", "Total training steps");
  train_o.flag<int>(train, "--pack", "train.pack", "Critic2 packing (4 or 1)");
  train_o.flag<int>(train, "--ablate-pack", "train.pack", "Alias of --pack");
  train_o.flag<std::int64_t>(train, "--checkpoint-every", "train.checkpoint_every", "Checkpoint interval in steps");
  train->add_option("--data", data, "Dataset directory or manifest.csv")->required();
  train->add_option("--encoder", encoder, "Pretrained encoder checkpoint");
  train->add_option("--out", out, "Run directory")->required();
  train->add_flag("--resume", resume, "Continue from <out>/checkpoint.ckpt");

  auto* gen = app.add_subcommand("generate", "Generate frontal faces from profile PNGs");
  gen_o.attach(gen);
  gen->add_option("--checkpoint", checkpoint, "Training or generator checkpoint")->required();
  gen->add_option("--input", inputs, "PNG files or directories")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Fooling rate and mode coverage of a generator");
  eval_o.attach(ev);
  eval_o.flag<std::uint64_t>(ev, "--seed", "seed", "Seed");
  ev->add_option("--data", data, "Dataset directory or manifest.csv")->required();
  ev->add_option("--checkpoint", checkpoint, "Training checkpoint");
  ev->add_option("--classifier", classifier, "Identity classifier checkpoint (trained and saved when absent)");
  ev->add_option("--out", out, "Output directory");
  ev->add_flag("--chance-baseline", chance, "Evaluate a noise generator instead");
  ev->add_option("--ablate-pack", ablate_pack, "Expected Critic2 packing of the checkpoint (4 or 1)")
      ->check(CLI::IsMember({1, 4}));
  ev->add_option("--check-pretrain", pretrain_check, "Recompute the accuracy stored in an encoder checkpoint");
  ev->add_option("--grid-rows", grid_rows, "Rows in samples.png")->check(CLI::PositiveNumber);

  auto* cmp = app.add_subcommand("compare", "Controlled vs classic vs pack=1 over several seeds");
  cmp_o.attach(cmp);
  cmp_o.flag<std::int64_t>(cmp, "--steps", "train.max_steps", "Training steps per run");
  cmp->add_option("--seeds", seeds, "Seeds")->delimiter(',');
  cmp->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_o, out);
    if (pre->parsed()) return cmd_pretrain(pre_o, data, out);
    if (train->parsed()) return cmd_train(train_o, data, encoder, out, resume);
    if (gen->parsed()) return cmd_generate(gen_o, checkpoint, inputs, out);
    if (ev->parsed()) {
      if (out.empty() && pretrain_check.empty()) throw UsageError("eval needs --out");
      return cmd_eval(eval_o, data, checkpoint, classifier, out, chance, ablate_pack, pretrain_check, grid_rows);
    }
    if (cmp->parsed()) return cmd_compare(cmp_o, seeds, out);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kRuntime;
  } catch (const ManifestError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
