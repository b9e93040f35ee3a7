#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dualgan/config.hpp"
#include "dualgan/experiment.hpp"

namespace py = pybind11;
using namespace dualgan;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  FloatArray a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.storage().begin(), t.storage().end(), a.mutable_data());
  return a;
}

RunConfig make_config(const std::map<std::string, std::string>& sets) {
  RunConfig c = RunConfig::desk();
  for (const auto& [k, v] : sets) c.set(k, v);
  c.finalize();
  return c;
}

py::dict row_dict(const MetricsRow& r) {
  py::dict d;
  d["step"] = r.step;
  d["mode"] = r.mode;
  d["branch"] = r.branch;
  d["d1_loss"] = r.d1_loss;
  d["d2_loss"] = r.d2_loss;
  d["g1_loss"] = r.g1_loss;
  d["g2_loss"] = r.g2_loss;
  d["w1"] = r.w1;
  d["w2"] = r.w2;
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["fooling_rate"] = r.fooling_rate;
  d["modes_covered"] = r.modes_covered;
  d["num_samples"] = r.num_samples;
  d["per_identity_hits"] = r.per_identity_hits;
  return d;
}

/// Synthetic dataset, pretrained encoder, classifier and trainer of one seed.
class DeskRun {
 public:
  DeskRun(const std::map<std::string, std::string>& sets, const std::filesystem::path& work_dir)
      : setup_(prepare_seed(make_config(sets), work_dir)),
        trainer_(setup_.config.train, setup_.encoder, setup_.manifest, *setup_.store) {}

  double pretrain_accuracy() const { return setup_.pretrain_accuracy; }
  double classifier_accuracy() const { return setup_.classifier.train_accuracy; }
  std::string resolved_config() const { return setup_.config.to_text(); }

  py::dict step() {
    MetricsRow r = trainer_.step();
    return row_dict(r);
  }

  py::list train(std::int64_t steps) {
    py::list rows;
    for (std::int64_t i = 0; i < steps; ++i) rows.append(step());
    return rows;
  }

  py::dict evaluate() {
    return report_dict(fooling_rate(generator_fn(trainer_.generator()), setup_.classifier, setup_.manifest,
                                    *setup_.store, probe_records(setup_.manifest)));
  }

  FloatArray generate(const FloatArray& profiles) { return to_array(trainer_.generator().generate(to_tensor(profiles))); }

  std::int64_t step_index() const { return trainer_.step_index(); }

  void save(const std::filesystem::path& path) const { write_checkpoint(path, trainer_.checkpoint()); }

 private:
  SeedSetup setup_;
  Trainer trainer_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dual-critic frontalization GAN core";

  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ManifestError>(m, "ManifestError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);

  m.def(
      "critic_loss",
      [](const std::vector<float>& real, const std::vector<float>& fake) { return critic_loss(real, fake); },
      py::arg("real_scores"), py::arg("fake_scores"));
  m.def(
      "generator_partial_loss", [](const std::vector<float>& fake) { return generator_partial_loss(fake); },
      py::arg("fake_scores"));
  m.def(
      "schedule_decision",
      [](double d1, double d2, double g1, double g2, double tau, bool literal) {
        SchedulerState s;
        s.d1_loss = d1;
        s.d2_loss = d2;
        s.g1_loss = g1;
        s.g2_loss = g2;
        s.tau = tau;
        s.literal_final_branch = literal;
        const Action a = schedule_decision(s);
        return py::make_tuple(branch_name(a), a.weights.w1, a.weights.w2);
      },
      py::arg("d1_loss"), py::arg("d2_loss"), py::arg("g1_loss"), py::arg("g2_loss"), py::arg("tau") = -0.8,
      py::arg("literal_final_branch") = false, "Returns (branch, w1, w2).");

  m.def(
      "pack2x2",
      [](const FloatArray& a, const FloatArray& b, const FloatArray& c, const FloatArray& d) {
        return to_array(pack2x2(to_tensor(a), to_tensor(b), to_tensor(c), to_tensor(d)));
      },
      py::arg("top_left"), py::arg("top_right"), py::arg("bottom_left"), py::arg("bottom_right"));
  m.def(
      "unpack2x2",
      [](const FloatArray& p) {
        py::list out;
        for (const auto& t : unpack2x2(to_tensor(p))) out.append(to_array(t));
        return out;
      },
      py::arg("packed"));

  m.def(
      "shape_report",
      [](const std::string& kind, const std::string& preset) {
        const ScalePreset p = preset == "reference" ? ScalePreset::reference() : ScalePreset::desk();
        Network net = [&] {
          switch (parse_network_kind(kind)) {
            case NetworkKind::encoder: return build_encoder(p, 0);
            case NetworkKind::decoder: return build_decoder(p, 0);
            case NetworkKind::critic1: return build_critic1(p, 0);
            case NetworkKind::critic2: return build_critic2(p, 0);
            default: throw std::invalid_argument("shape_report: unsupported network " + kind);
          }
        }();
        py::list rows;
        for (const auto& r : net.shape_report()) rows.append(py::make_tuple(r.name, r.input, r.output, r.kernel, r.stride));
        return rows;
      },
      py::arg("kind"), py::arg("preset") = "reference", "Rows (name, input, output, kernel, stride).");

  m.def(
      "synth",
      [](const std::filesystem::path& out_dir, int identities, std::uint64_t seed) {
        SyntheticSpec s;
        s.num_identities = identities;
        s.seed = seed;
        const Manifest man = synth_generate(s, out_dir);
        py::list recs;
        for (const auto& r : man.records) recs.append(py::make_tuple(r.image_path, r.identity_id, r.yaw_degrees, to_string(r.split)));
        return recs;
      },
      py::arg("out_dir"), py::arg("identities") = 16, py::arg("seed") = 1,
      "Renders the synthetic set; returns (path, identity, yaw, split) records.");

  m.def(
      "read_checkpoint",
      [](const std::filesystem::path& path) {
        const Checkpoint c = read_checkpoint(path);
        py::dict arrays;
        for (const auto& [name, t] : c.arrays) arrays[py::str(name)] = to_array(t);
        return py::make_tuple(c.meta, arrays);
      },
      py::arg("path"), "Returns (meta, arrays).");

  m.def(
      "resolved_config", [](const std::map<std::string, std::string>& sets) { return make_config(sets).to_text(); },
      py::arg("overrides") = std::map<std::string, std::string>{});

  py::class_<DeskRun>(m, "DeskRun", "Synthetic dataset, frozen encoder, classifier and trainer for one seed")
      .def(py::init<const std::map<std::string, std::string>&, const std::filesystem::path&>(), py::arg("overrides"),
           py::arg("work_dir"))
      .def_property_readonly("pretrain_accuracy", &DeskRun::pretrain_accuracy)
      .def_property_readonly("classifier_accuracy", &DeskRun::classifier_accuracy)
      .def_property_readonly("step_index", &DeskRun::step_index)
      .def("resolved_config", &DeskRun::resolved_config)
      .def("step", &DeskRun::step)
      .def("train", &DeskRun::train, py::arg("steps"))
      .def("evaluate", &DeskRun::evaluate)
      .def("generate", &DeskRun::generate, py::arg("profiles"))
      .def("save", &DeskRun::save, py::arg("path"));
}
