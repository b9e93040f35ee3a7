#include "dualgan/eval.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dualgan/rng.hpp"

namespace dualgan {

namespace {

constexpr std::size_t kChunk = 32;

template <typename F>
void for_chunks(const std::vector<std::size_t>& records, F&& f) {
  for (std::size_t b = 0; b < records.size(); b += kChunk) {
    std::vector<std::size_t> ids(records.begin() + static_cast<std::ptrdiff_t>(b),
                                 records.begin() + static_cast<std::ptrdiff_t>(std::min(records.size(), b + kChunk)));
    f(ids);
  }
}

Tensor checked_generate(const GenerateFn& generate, const Tensor& profiles, const std::vector<std::size_t>& ids) {
  Tensor out = generate(profiles, ids);
  if (out.shape() != profiles.shape()) {
    throw ShapeError("generator returned " + shape_string(out.shape()) + " for profiles " +
                     shape_string(profiles.shape()));
  }
  return out;
}

}  // namespace

std::vector<int> IdentityClassifier::predict(const Tensor& images) {
  Tensor logits = head.infer(encoder.infer(images));
  const std::int64_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const float* row = logits.data() + i * k;
    out[static_cast<std::size_t>(i)] = classes.at(static_cast<std::size_t>(std::max_element(row, row + k) - row));
  }
  return out;
}

bool IdentityClassifier::knows(int identity) const {
  return std::binary_search(classes.begin(), classes.end(), identity);
}

IdentityClassifier train_identity_classifier(const ScalePreset& preset, const Manifest& manifest,
                                             const ImageStore& store, const PretrainConfig& config) {
  std::vector<std::size_t> frontals;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.is_frontal(manifest.records[i])) frontals.push_back(i);
  }
  auto r = train_classifier(preset, manifest, store, frontals, config);
  return {std::move(r.encoder), std::move(r.head), std::move(r.classes), r.accuracy, std::move(r.training_records)};
}

Checkpoint classifier_checkpoint(const IdentityClassifier& c) {
  Checkpoint ckpt;
  ckpt.set_preset(c.encoder.preset());
  ckpt.meta["kind"] = "identity_classifier";
  std::string classes;
  for (int id : c.classes) classes += (classes.empty() ? "" : ",") + std::to_string(id);
  ckpt.meta["classes"] = classes;
  ckpt.meta["train_accuracy"] = encode_double(c.train_accuracy);
  store_network(ckpt, c.encoder);
  store_network(ckpt, c.head);
  return ckpt;
}

IdentityClassifier restore_classifier(const Checkpoint& ckpt) {
  if (ckpt.meta_at("kind") != "identity_classifier") {
    throw CheckpointError("checkpoint: expected kind identity_classifier, got " + ckpt.meta_at("kind"));
  }
  std::vector<int> classes;
  std::stringstream ss(ckpt.meta_at("classes"));
  for (std::string tok; std::getline(ss, tok, ',');) classes.push_back(std::stoi(tok));
  const ScalePreset preset = ckpt.preset();
  IdentityClassifier c{build_encoder(preset, 0), build_classifier_head(preset, static_cast<int>(classes.size()), 0),
                       classes, decode_double(ckpt.meta_at("train_accuracy")), {}};
  restore_network(ckpt, c.encoder);
  restore_network(ckpt, c.head);
  return c;
}

GenerateFn generator_fn(GeneratorBundle& generator) {
  return [&generator](const Tensor& profiles, const std::vector<std::size_t>&) { return generator.generate(profiles); };
}

GenerateFn oracle_frontal_fn(const Manifest& manifest, const ImageStore& store) {
  std::map<int, std::size_t> first_frontal;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.is_frontal(manifest.records[i])) first_frontal.emplace(manifest.records[i].identity_id, i);
  }
  return [&manifest, &store, first_frontal](const Tensor&, const std::vector<std::size_t>& records) {
    std::vector<std::size_t> ids;
    for (auto r : records) ids.push_back(first_frontal.at(manifest.records.at(r).identity_id));
    return store.gather(ids);
  };
}

GenerateFn noise_fn(std::uint64_t seed) {
  return [seed](const Tensor& profiles, const std::vector<std::size_t>& records) {
    Tensor out(profiles.shape());
    const std::int64_t per = profiles.size() / profiles.dim(0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      Rng rng(derive_seed(seed, {0x401e, records[i]}));
      float* p = out.data() + static_cast<std::int64_t>(i) * per;
      for (std::int64_t j = 0; j < per; ++j) p[j] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return out;
  };
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["fooling_rate"] = report.fooling_rate;
  nlohmann::ordered_json hits = nlohmann::ordered_json::object();
  for (const auto& [id, n] : report.per_identity_hits) hits[std::to_string(id)] = n;
  j["per_identity_hits"] = hits;
  j["modes_covered"] = report.modes_covered;
  j["num_samples"] = report.num_samples;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.fooling_rate = j.at("fooling_rate").get<double>();
  for (const auto& [k, v] : j.at("per_identity_hits").items()) r.per_identity_hits[std::stoi(k)] = v.get<int>();
  r.modes_covered = j.at("modes_covered").get<int>();
  r.num_samples = j.at("num_samples").get<int>();
  return r;
}

std::vector<std::size_t> probe_records(const Manifest& manifest) {
  std::vector<std::size_t> test, all;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (manifest.is_frontal(r)) continue;
    all.push_back(i);
    if (r.split == Split::test) test.push_back(i);
  }
  return test.empty() ? all : test;
}

EvalReport fooling_rate(const GenerateFn& generate, IdentityClassifier& classifier, const Manifest& manifest,
                        const ImageStore& store, const std::vector<std::size_t>& records) {
  if (records.empty()) throw std::invalid_argument("fooling_rate: empty probe set");
  EvalReport report;
  for (auto r : records) {
    const int id = manifest.records.at(r).identity_id;
    if (!classifier.knows(id)) {
      throw std::invalid_argument("fooling_rate: identity " + std::to_string(id) + " is unknown to the classifier");
    }
    report.per_identity_hits.emplace(id, 0);
  }
  std::set<int> modes;
  int hits = 0;
  for_chunks(records, [&](const std::vector<std::size_t>& ids) {
    const auto predicted = classifier.predict(checked_generate(generate, store.gather(ids), ids));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      modes.insert(predicted[i]);
      const int id = manifest.records[ids[i]].identity_id;
      if (predicted[i] == id) {
        ++report.per_identity_hits[id];
        ++hits;
      }
    }
  });
  report.num_samples = static_cast<int>(records.size());
  report.fooling_rate = static_cast<double>(hits) / report.num_samples;
  report.modes_covered = static_cast<int>(modes.size());
  return report;
}

int mode_coverage(const GenerateFn& generate, IdentityClassifier& classifier, const ImageStore& store,
                  const std::vector<std::size_t>& records) {
  if (records.empty()) throw std::invalid_argument("mode_coverage: empty probe set");
  std::set<int> modes;
  for_chunks(records, [&](const std::vector<std::size_t>& ids) {
    for (int c : classifier.predict(checked_generate(generate, store.gather(ids), ids))) modes.insert(c);
  });
  return static_cast<int>(modes.size());
}

Image sample_grid(const GenerateFn& generate, const Manifest& manifest, const ImageStore& store,
                  const std::vector<std::size_t>& records) {
  if (records.empty()) throw std::invalid_argument("sample_grid: need at least one profile");
  const int res = store.resolution();
  auto truth = oracle_frontal_fn(manifest, store);
  Image grid{3 * res, static_cast<int>(records.size()) * res, 3, {}};
  grid.pixels.assign(static_cast<std::size_t>(grid.width) * grid.height * 3, 0);
  std::size_t row = 0;
  for_chunks(records, [&](const std::vector<std::size_t>& ids) {
    const Tensor profiles = store.gather(ids);
    const Tensor columns[3] = {profiles, checked_generate(generate, profiles, ids), truth(profiles, ids)};
    for (std::size_t i = 0; i < ids.size(); ++i, ++row) {
      for (int c = 0; c < 3; ++c) {
        const auto i64 = static_cast<std::int64_t>(i);
        const Image tile = denormalize(slice_leading(columns[c], i64, i64 + 1).reshaped({res, res, 3}));
        for (int y = 0; y < res; ++y) {
          std::copy_n(tile.pixels.data() + static_cast<std::size_t>(y) * res * 3, res * 3,
                      grid.pixels.data() + ((row * res + y) * grid.width + static_cast<std::size_t>(c) * res) * 3);
        }
      }
    }
  });
  return grid;
}

void export_sample_grid(const GenerateFn& generate, const Manifest& manifest, const ImageStore& store,
                        const std::vector<std::size_t>& records, const std::filesystem::path& path) {
  write_png(path, sample_grid(generate, manifest, store, records));
}

}  // namespace dualgan
