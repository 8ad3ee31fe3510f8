// Python bindings for the pecan core. Mirrors the CLI surface: build or load
// datasets, train a hash-partitioned ensemble, certify a test set, aggregate
// votes, and run the metric / audit machinery.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <span>

#include "pecan/aggregate.hpp"
#include "pecan/attack.hpp"
#include "pecan/audit.hpp"
#include "pecan/bounds.hpp"
#include "pecan/certify.hpp"
#include "pecan/data.hpp"
#include "pecan/ensemble.hpp"
#include "pecan/errors.hpp"
#include "pecan/metrics.hpp"
#include "pecan/partition.hpp"
#include "pecan/train.hpp"

namespace py = pybind11;
using namespace pecan;

namespace {

RegionSpec make_region_spec(const std::string& norm, double eps,
                            std::uint32_t s) {
  RegionSpec spec;
  spec.kind = region_kind_from_string(norm);
  spec.eps = eps;
  spec.s = s;
  return spec;
}

Vote make_vote(std::uint32_t label, bool cert, bool sentinel) {
  return Vote{label, cert ? Verdict::Cert : Verdict::Abstain, sentinel};
}

}  // namespace

PYBIND11_MODULE(_pecan, m) {
  m.doc() = "partition-and-certify ensemble defense core";

  py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);
  py::register_exception<io_error>(m, "IoError", PyExc_OSError);
  py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<audit_violation>(m, "AuditViolation",
                                          PyExc_RuntimeError);

  // ---- data ----
  py::class_<Example>(m, "Example")
      .def(py::init([](std::vector<float> features, std::uint32_t label) {
             return Example{std::move(features), label};
           }),
           py::arg("features"), py::arg("label"))
      .def_readwrite("features", &Example::features)
      .def_readwrite("label", &Example::label)
      .def("__eq__", [](const Example& a, const Example& b) { return a == b; });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](std::vector<Example> examples, std::uint32_t feature_dim,
                       std::uint32_t num_classes) {
             return Dataset{std::move(examples), feature_dim, num_classes};
           }),
           py::arg("examples"), py::arg("feature_dim"), py::arg("num_classes"))
      .def_readwrite("examples", &Dataset::examples)
      .def_readwrite("feature_dim", &Dataset::feature_dim)
      .def_readwrite("num_classes", &Dataset::num_classes)
      .def("__len__", &Dataset::size);

  m.def("synth_blobs", &synth_blobs, py::arg("num_classes"),
        py::arg("feature_dim"), py::arg("per_class"), py::arg("spread"),
        py::arg("seed"));
  m.def("load_csv", &load_csv, py::arg("path"), py::arg("num_classes"),
        py::arg("normalize") = false);
  m.def("save_csv", &save_csv, py::arg("dataset"), py::arg("path"));
  m.def("load_idx", &load_idx, py::arg("images"), py::arg("labels"));
  m.def("canonical_bytes", [](const Example& e) {
    return py::bytes(canonical_bytes(e));
  });
  m.def("symdiff_size", &symdiff_size, py::arg("a"), py::arg("b"));

  // ---- partition ----
  m.def("assign", &assign, py::arg("example"), py::arg("n"));
  m.def("partition", &partition, py::arg("dataset"), py::arg("n"));

  // ---- model / training ----
  py::class_<MlpModel>(m, "MlpModel")
      .def_readonly("layer_dims", &MlpModel::layer_dims)
      .def_readonly("sentinel", &MlpModel::sentinel)
      .def_property_readonly("input_dim", &MlpModel::input_dim)
      .def_property_readonly("output_dim", &MlpModel::output_dim);

  m.def("forward", [](const MlpModel& model, const std::vector<float>& x) {
    return forward(model, x);
  });
  m.def("predict", [](const MlpModel& model, const std::vector<float>& x) {
    return predict(model, x);
  });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("layer_dims", &TrainConfig::layer_dims)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("epochs_warmup", &TrainConfig::epochs_warmup)
      .def_readwrite("epochs_mixed", &TrainConfig::epochs_mixed)
      .def_readwrite("epochs_full", &TrainConfig::epochs_full)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_property(
          "region_kind",
          [](const TrainConfig& c) { return to_string(c.region_kind); },
          [](TrainConfig& c, const std::string& s) {
            c.region_kind = region_kind_from_string(s);
          })
      .def_readwrite("eps_train", &TrainConfig::eps_train)
      .def_readwrite("s_train", &TrainConfig::s_train)
      .def_readwrite("kappa_start", &TrainConfig::kappa_start)
      .def_readwrite("kappa_end", &TrainConfig::kappa_end);

  m.def("train", [](const Dataset& d, const TrainConfig& cfg,
                    std::uint64_t model_seed) {
    return train(d, cfg, model_seed);
  });

  py::class_<Ensemble>(m, "Ensemble")
      .def_readonly("n", &Ensemble::n)
      .def_readonly("global_seed", &Ensemble::global_seed)
      .def_readonly("config_digest", &Ensemble::config_digest)
      .def_readonly("models", &Ensemble::models);

  m.def("train_ensemble", &train_ensemble, py::arg("dataset"), py::arg("cfg"),
        py::arg("n"), py::arg("jobs") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("save_ensemble", &save_ensemble, py::arg("ensemble"), py::arg("dir"));
  m.def("load_ensemble", &load_ensemble, py::arg("dir"));
  m.def("config_digest", &config_digest, py::arg("cfg"), py::arg("n"));

  // ---- certification ----
  m.def("propagate_bounds",
        [](const MlpModel& model, const std::vector<float>& x,
           const std::string& norm, double eps, std::uint32_t s) {
          Region r = anchor(make_region_spec(norm, eps, s), x);
          Interval logits = propagate(model, r);
          return std::make_pair(logits.lower, logits.upper);
        },
        py::arg("model"), py::arg("x"), py::arg("norm"), py::arg("eps") = 0.0,
        py::arg("s") = 0);
  m.def("crown_bounds",
        [](const MlpModel& model, const std::vector<float>& x,
           const std::string& norm, double eps, std::uint32_t s) {
          Region r = anchor(make_region_spec(norm, eps, s), x);
          Interval logits = crown_tighten(model, r);
          return std::make_pair(logits.lower, logits.upper);
        },
        py::arg("model"), py::arg("x"), py::arg("norm"), py::arg("eps") = 0.0,
        py::arg("s") = 0);
  m.def("certify_example",
        [](const MlpModel& model, const std::vector<float>& x,
           const std::string& norm, double eps, std::uint32_t s,
           bool use_crown) {
          auto cp = certify_example(model, x, make_region_spec(norm, eps, s),
                                    use_crown);
          return std::make_pair(cp.label, cp.verdict == Verdict::Cert);
        },
        py::arg("model"), py::arg("x"), py::arg("norm"), py::arg("eps") = 0.0,
        py::arg("s") = 0, py::arg("use_crown") = false);
  m.def("robust_loss",
        [](const MlpModel& model, const std::vector<float>& x, std::uint32_t y,
           const std::string& norm, double eps, std::uint32_t s,
           double kappa) {
          return robust_loss(model, x, y, make_region_spec(norm, eps, s),
                             kappa);
        },
        py::arg("model"), py::arg("x"), py::arg("y"), py::arg("norm"),
        py::arg("eps") = 0.0, py::arg("s") = 0, py::arg("kappa") = 0.0);

  // ---- aggregation ----
  py::class_<AggregateResult>(m, "AggregateResult")
      .def_readonly("y_star", &AggregateResult::y_star)
      .def_readonly("y_prime", &AggregateResult::y_prime)
      .def_readonly("n1", &AggregateResult::n1)
      .def_readonly("n2", &AggregateResult::n2)
      .def_readonly("n3", &AggregateResult::n3)
      .def_readonly("radius", &AggregateResult::radius);

  m.def("aggregate",
        [](const std::vector<std::tuple<std::uint32_t, bool, bool>>& votes,
           std::uint32_t num_classes) {
          std::vector<Vote> vs;
          vs.reserve(votes.size());
          for (const auto& [label, cert, sentinel] : votes) {
            vs.push_back(make_vote(label, cert, sentinel));
          }
          return aggregate(vs, num_classes);
        },
        py::arg("votes"), py::arg("num_classes"),
        "votes: list of (label, certified, sentinel) triples");
  m.def("dpa_radius", &dpa_radius, py::arg("labels"), py::arg("num_classes"));
  m.def("radius_to_modifications", &radius_to_modifications, py::arg("r"));

  // ---- ensemble certification + metrics ----
  py::class_<ResultRow>(m, "ResultRow")
      .def(py::init([](std::uint64_t example_id, std::uint32_t true_label,
                       std::uint32_t y_star,
                       std::optional<std::int64_t> radius) {
             return ResultRow{example_id, true_label, y_star, radius};
           }),
           py::arg("example_id"), py::arg("true_label"), py::arg("y_star"),
           py::arg("radius") = std::nullopt)
      .def_readwrite("example_id", &ResultRow::example_id)
      .def_readwrite("true_label", &ResultRow::true_label)
      .def_readwrite("y_star", &ResultRow::y_star)
      .def_readwrite("radius", &ResultRow::radius);

  py::class_<CertRow>(m, "CertRow")
      .def_readonly("row", &CertRow::row)
      .def_readonly("y_prime", &CertRow::y_prime)
      .def_readonly("n1", &CertRow::n1)
      .def_readonly("n2", &CertRow::n2)
      .def_readonly("n3", &CertRow::n3);

  m.def("certify_dataset",
        [](const Ensemble& ens, const Dataset& test, const std::string& norm,
           double eps, std::uint32_t s, bool use_crown, const std::string& mode,
           unsigned jobs) {
          return certify_dataset(ens, test, make_region_spec(norm, eps, s),
                                 use_crown, vote_mode_from_string(mode), jobs);
        },
        py::arg("ensemble"), py::arg("test"), py::arg("norm"),
        py::arg("eps") = 0.0, py::arg("s") = 0, py::arg("use_crown") = false,
        py::arg("mode") = "pecan", py::arg("jobs") = 0,
        py::call_guard<py::gil_scoped_release>());

  py::class_<MetricPoint>(m, "MetricPoint")
      .def_readonly("R", &MetricPoint::R)
      .def_readonly("certified_accuracy", &MetricPoint::certified_accuracy)
      .def_readonly("normal_accuracy", &MetricPoint::normal_accuracy)
      .def_readonly("asr", &MetricPoint::asr)
      .def_readonly("abstention_rate", &MetricPoint::abstention_rate);

  m.def("certified_accuracy", &certified_accuracy, py::arg("rows"),
        py::arg("train_size"), py::arg("R"));
  m.def("normal_accuracy", &normal_accuracy, py::arg("rows"));
  m.def("attack_success_rate", &attack_success_rate, py::arg("rows"),
        py::arg("train_size"), py::arg("R"));
  m.def("abstention_rate", &abstention_rate, py::arg("rows"),
        py::arg("train_size"), py::arg("R"));
  m.def("metric_curve", &metric_curve, py::arg("rows"), py::arg("train_size"),
        py::arg("R_values"));

  // ---- attack ----
  py::class_<TriggerSpec>(m, "TriggerSpec")
      .def(py::init([](std::vector<std::pair<std::uint32_t, float>> a) {
             return make_explicit_trigger(a);
           }),
           py::arg("assignments"))
      .def_readonly("assignments", &TriggerSpec::assignments)
      .def("__len__", &TriggerSpec::size);

  py::class_<PoisonPlan>(m, "PoisonPlan")
      .def(py::init<>())
      .def_readwrite("poison_fraction", &PoisonPlan::poison_fraction)
      .def_readwrite("target_label", &PoisonPlan::target_label)
      .def_readwrite("triggers", &PoisonPlan::triggers)
      .def_readwrite("seed", &PoisonPlan::seed)
      .def_readwrite("flip_labels", &PoisonPlan::flip_labels);

  m.def("apply_trigger", [](const std::vector<float>& x, const TriggerSpec& t) {
    return apply_trigger(x, t);
  });
  m.def("poison_dataset", &poison_dataset, py::arg("dataset"),
        py::arg("plan"));
  m.def("select_trigger_features", &select_trigger_features,
        py::arg("dataset"), py::arg("size"), py::arg("target_label"),
        py::arg("seed"));
  m.def("perturb_dataset",
        [](const Dataset& d, std::uint64_t num_delete, std::uint64_t num_insert,
           const std::optional<Dataset>& insert_source, std::uint64_t seed) {
          return perturb_dataset(d, num_delete, num_insert,
                                 insert_source ? &*insert_source : nullptr,
                                 seed);
        },
        py::arg("dataset"), py::arg("num_delete"), py::arg("num_insert"),
        py::arg("insert_source") = std::nullopt, py::arg("seed") = 0);

  // ---- audit ----
  py::class_<AuditOptions>(m, "AuditOptions")
      .def(py::init<>())
      .def_readwrite("n", &AuditOptions::n)
      .def_readwrite("cfg", &AuditOptions::cfg)
      .def_property(
          "region",
          [](const AuditOptions& o) {
            return std::make_tuple(to_string(o.region.kind), o.region.eps,
                                   o.region.s);
          },
          [](AuditOptions& o,
             const std::tuple<std::string, double, std::uint32_t>& r) {
            o.region = make_region_spec(std::get<0>(r), std::get<1>(r),
                                        std::get<2>(r));
          })
      .def_readwrite("trials", &AuditOptions::trials)
      .def_readwrite("seed", &AuditOptions::seed)
      .def_readwrite("bidirectional", &AuditOptions::bidirectional)
      .def_readwrite("over_budget_trials", &AuditOptions::over_budget_trials)
      .def_readwrite("use_crown", &AuditOptions::use_crown)
      .def_readwrite("jobs", &AuditOptions::jobs);

  py::class_<AuditReport>(m, "AuditReport")
      .def_readonly("trials", &AuditReport::trials)
      .def_readonly("violations", &AuditReport::violations)
      .def_readonly("bidir_checked", &AuditReport::bidir_checked)
      .def_readonly("bidir_violations", &AuditReport::bidir_violations)
      .def_readonly("over_budget_trials", &AuditReport::over_budget_trials)
      .def_readonly("over_budget_flips", &AuditReport::over_budget_flips)
      .def_readonly("test_size", &AuditReport::test_size)
      .def_readonly("certified_rows", &AuditReport::certified_rows);

  m.def("audit_soundness", &audit_soundness, py::arg("train"), py::arg("test"),
        py::arg("options"), py::call_guard<py::gil_scoped_release>());
}
