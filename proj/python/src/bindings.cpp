#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedat/adversary.hpp"
#include "fedat/checkpoint.hpp"
#include "fedat/config.hpp"
#include "fedat/data.hpp"
#include "fedat/fusion.hpp"
#include "fedat/orchestrator.hpp"
#include "fedat/schedule.hpp"
#include "fedat/svcca.hpp"

namespace py = pybind11;
using namespace fedat;

namespace {

ModelSpec make_spec(const std::vector<int>& layer_sizes, const std::string& activation, std::uint64_t seed) {
  ModelSpec spec{layer_sizes, activation_from_string(activation), seed};
  spec.validate();
  return spec;
}

Batch make_batch(const Matrix& inputs, const std::vector<int>& labels) { return Batch{inputs, labels}; }

// Configs cross the boundary as JSON text; the Python wrapper handles dicts.
ExperimentConfig config_from_text(const std::string& text) { return config_from_json(nlohmann::json::parse(text)); }

std::string report_text(const RoundReport& r) { return to_json(r).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated adversarial training simulator (C++ core)";

  py::register_exception<Error>(m, "FedatError", PyExc_ValueError);

  m.def("epochs_for_round",
        [](int t, int e0, double gamma, int freq) { return epochs_for_round(t, ESchedule{e0, gamma, freq}); },
        py::arg("t"), py::arg("e0"), py::arg("gamma") = 1.0, py::arg("freq") = 1);

  m.def("param_count", [](const std::vector<int>& sizes) {
    return param_layout(make_spec(sizes, "relu", 0)).size;
  });
  m.def("init_params",
        [](const std::vector<int>& sizes, const std::string& activation, std::uint64_t seed) {
          return init_params(make_spec(sizes, activation, seed));
        },
        py::arg("layer_sizes"), py::arg("activation") = "relu", py::arg("seed") = 0);

  m.def("forward",
        [](const Vector& params, const std::vector<int>& sizes, const std::string& activation, const Matrix& inputs) {
          ForwardResult r = forward(params, make_spec(sizes, activation, 0), inputs);
          return py::make_tuple(r.logits, r.hidden);
        },
        py::arg("params"), py::arg("layer_sizes"), py::arg("activation"), py::arg("inputs"));

  m.def("loss_and_grads",
        [](const Vector& params, const std::vector<int>& sizes, const std::string& activation, const Matrix& inputs,
           const std::vector<int>& labels) {
          LossAndGrads r = loss_and_grads(params, make_spec(sizes, activation, 0), make_batch(inputs, labels));
          return py::make_tuple(r.loss, Vector(r.grads.param_grad), Matrix(r.grads.input_grad));
        },
        py::arg("params"), py::arg("layer_sizes"), py::arg("activation"), py::arg("inputs"), py::arg("labels"));

  m.def("pgd_attack",
        [](const Vector& params, const std::vector<int>& sizes, const std::string& activation, const Matrix& inputs,
           const std::vector<int>& labels, int steps, const std::string& epsilon, const std::string& alpha, double lo,
           double hi, bool random_start, std::uint64_t seed) {
          AttackConfig cfg{steps, parse_fraction(epsilon), parse_fraction(alpha), lo, hi, random_start};
          Rng rng(seed);
          return pgd_attack(params, make_spec(sizes, activation, 0), make_batch(inputs, labels), cfg, rng).inputs;
        },
        py::arg("params"), py::arg("layer_sizes"), py::arg("activation"), py::arg("inputs"), py::arg("labels"),
        py::arg("steps") = 10, py::arg("epsilon") = "8/255", py::arg("alpha") = "2/255", py::arg("lo") = 0.0,
        py::arg("hi") = 1.0, py::arg("random_start") = false, py::arg("seed") = 0);

  m.def("fedavg_fuse",
        [](const std::vector<Vector>& params, const std::vector<std::size_t>& sizes) {
          if (params.size() != sizes.size()) throw Error("params and sizes differ in length");
          std::vector<ClientPayload> payloads;
          for (std::size_t k = 0; k < params.size(); ++k) payloads.push_back({params[k], sizes[k], {}});
          return fedavg_fuse(payloads);
        },
        py::arg("params"), py::arg("shard_sizes"));

  m.def("fisher_diag",
        [](const Vector& params, const std::vector<int>& sizes, const std::string& activation, const Matrix& inputs,
           const std::vector<int>& labels) {
          return fisher_diag(params, make_spec(sizes, activation, 0), make_batch(inputs, labels));
        },
        py::arg("params"), py::arg("layer_sizes"), py::arg("activation"), py::arg("inputs"), py::arg("labels"));

  m.def("curv_penalty",
        [](const Vector& theta, const std::vector<Vector>& anchors, const std::vector<Vector>& fishers) {
          if (anchors.size() != fishers.size()) throw Error("anchors and fishers differ in length");
          std::vector<CurvAnchor> list;
          for (std::size_t j = 0; j < anchors.size(); ++j) list.push_back({anchors[j], fishers[j]});
          Penalty p = curv_penalty(theta, list);
          return py::make_tuple(p.value, p.grad);
        },
        py::arg("theta"), py::arg("anchors"), py::arg("fishers"));

  m.def("make_synthetic",
        [](int class_count, int per_class, int input_dim, double separation, double noise, std::uint64_t seed) {
          Dataset ds = make_synthetic(SyntheticSpec{class_count, per_class, input_dim, separation, noise, seed});
          return py::make_tuple(ds.inputs, ds.labels);
        },
        py::arg("class_count"), py::arg("per_class"), py::arg("input_dim"), py::arg("separation") = 0.35,
        py::arg("noise") = 0.12, py::arg("seed") = 0);

  m.def("partition_non_iid",
        [](const std::vector<int>& labels, int class_count, int clients, double skew, std::uint64_t seed) {
          Dataset ds;
          ds.labels = labels;
          ds.class_count = class_count;
          ds.inputs = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), 1);
          Partition p = partition_non_iid(ds, PartitionSpec{clients, skew, seed});
          return py::make_tuple(p.shards, p.majority_classes);
        },
        py::arg("labels"), py::arg("class_count"), py::arg("clients"), py::arg("skew"), py::arg("seed") = 0);

  m.def("partition_iid",
        [](const std::vector<int>& labels, int class_count, int clients, std::uint64_t seed) {
          Dataset ds;
          ds.labels = labels;
          ds.class_count = class_count;
          ds.inputs = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), 1);
          return partition_iid(ds, clients, seed).shards;
        },
        py::arg("labels"), py::arg("class_count"), py::arg("clients"), py::arg("seed") = 0);

  m.def("svcca_score",
        [](const Matrix& a, const Matrix& b, double keep) {
          SvccaResult r = svcca_score(a, b, keep);
          py::dict d;
          d["score"] = r.score;
          d["correlations"] = r.correlations;
          d["kept_a"] = r.kept_a;
          d["kept_b"] = r.kept_b;
          d["degenerate"] = r.degenerate;
          return d;
        },
        py::arg("a"), py::arg("b"), py::arg("variance_keep") = 0.99);

  m.def("layer_activations",
        [](const Vector& params, const std::vector<int>& sizes, const std::string& activation, const Matrix& probe,
           int layer) { return layer_activations(params, make_spec(sizes, activation, 0), probe, layer).values; },
        py::arg("params"), py::arg("layer_sizes"), py::arg("activation"), py::arg("probe"), py::arg("layer"));

  m.def("interpolate_models", &interpolate_models, py::arg("a"), py::arg("b"), py::arg("w"));
  m.def("default_interpolation_grid", &default_interpolation_grid);
  m.def("loss_sweep",
        [](const Vector& a, const Vector& b, const std::vector<int>& sizes, const std::string& activation,
           const Matrix& inputs, const std::vector<int>& labels, std::optional<std::vector<double>> grid, int steps,
           const std::string& epsilon, const std::string& alpha, bool natural_only, std::uint64_t seed) {
          AttackConfig cfg{steps, parse_fraction(epsilon), parse_fraction(alpha), 0.0, 1.0, false};
          const auto points = loss_sweep(a, b, make_spec(sizes, activation, 0), make_batch(inputs, labels),
                                         natural_only ? nullptr : &cfg, grid ? *grid : default_interpolation_grid(),
                                         seed);
          py::list rows;
          for (const auto& p : points) rows.append(py::make_tuple(p.w, p.natural_loss, p.adversarial_loss));
          return rows;
        },
        py::arg("a"), py::arg("b"), py::arg("layer_sizes"), py::arg("activation"), py::arg("inputs"),
        py::arg("labels"), py::arg("grid") = py::none(), py::arg("steps") = 10, py::arg("epsilon") = "8/255",
        py::arg("alpha") = "2/255", py::arg("natural_only") = false, py::arg("seed") = 0);

  m.def("normalize_config", [](const std::string& text) { return to_json(config_from_text(text)).dump(); });

  m.def("run_experiment",
        [](const std::string& config_text, int workers, std::function<void(std::string)> on_round) {
          const ExperimentConfig cfg = config_from_text(config_text);
          RunOptions opts;
          opts.workers = workers;
          if (on_round) opts.sink = [&](const RoundReport& r) {
            py::gil_scoped_acquire gil;
            on_round(report_text(r));
          };
          ExperimentResult result;
          {
            py::gil_scoped_release release;
            result = run_experiment(cfg, opts);
          }
          std::vector<std::string> reports;
          for (const auto& r : result.reports) reports.push_back(report_text(r));
          return py::make_tuple(reports, Vector(result.final_params));
        },
        py::arg("config_json"), py::arg("workers") = 1, py::arg("on_round") = nullptr);

  py::class_<Simulation>(m, "Simulation")
      .def(py::init([](const std::string& text, int workers) { return new Simulation(config_from_text(text), workers); }),
           py::arg("config_json"), py::arg("workers") = 1)
      .def("run_round", [](Simulation& s) { return report_text(s.run_round()); })
      .def_property_readonly("next_round", &Simulation::next_round)
      .def_property_readonly("global_params", [](const Simulation& s) { return Vector(s.global()); })
      .def_property_readonly("local_models", [](const Simulation& s) { return s.last_local_models(); })
      .def_property_readonly("train_set", [](const Simulation& s) {
        return py::make_tuple(s.train_set().inputs, s.train_set().labels);
      })
      .def_property_readonly("test_set", [](const Simulation& s) {
        return py::make_tuple(s.test_set().inputs, s.test_set().labels);
      });

  m.def("write_checkpoint",
        [](const std::string& path, const Vector& values, const std::vector<int>& sizes, const std::string& activation,
           std::uint64_t seed, const std::string& tensor) {
          write_checkpoint(path, Checkpoint{make_spec(sizes, activation, seed), values, tensor});
        },
        py::arg("path"), py::arg("values"), py::arg("layer_sizes"), py::arg("activation") = "relu",
        py::arg("seed") = 0, py::arg("tensor") = "params");
  m.def("read_checkpoint", [](const std::string& path) {
    Checkpoint c = read_checkpoint(path);
    py::dict d;
    d["values"] = Vector(c.values);
    d["layer_sizes"] = c.spec.layer_sizes;
    d["activation"] = to_string(c.spec.activation);
    d["seed"] = c.spec.seed;
    d["tensor"] = c.tensor;
    return d;
  });
}
