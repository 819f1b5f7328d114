#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "bfqr/beta_optimizer.hpp"
#include "bfqr/bfqr_core.hpp"
#include "bfqr/conformal.hpp"
#include "bfqr/config.hpp"
#include "bfqr/dataset.hpp"
#include "bfqr/errors.hpp"
#include "bfqr/harness.hpp"
#include "bfqr/interval_union.hpp"
#include "bfqr/metrics.hpp"
#include "bfqr/quantile_model.hpp"
#include "bfqr/report.hpp"

namespace py = pybind11;
using namespace bfqr;

namespace {

using Pair = std::pair<double, double>;

Interval to_interval(const Pair& p) { return {p.first, p.second}; }

std::vector<Pair> pieces(const IntervalUnion& u) {
  std::vector<Pair> out;
  for (const auto& iv : u.intervals()) out.emplace_back(iv.lower, iv.upper);
  return out;
}

std::vector<ConformityRecord> to_records(const std::vector<double>& scores, const std::vector<int>& groups,
                                         const std::vector<std::size_t>& bins) {
  if (scores.size() != groups.size() || scores.size() != bins.size())
    throw ShapeError("scores, groups and bins differ in length");
  std::vector<ConformityRecord> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], groups[i], bins[i], i};
  return out;
}

std::vector<EvaluationRecord> to_eval(const std::vector<bool>& covered, const std::vector<int>& groups,
                                      const std::vector<double>& labels) {
  if (covered.size() != groups.size() || covered.size() != labels.size())
    throw ShapeError("covered, groups and labels differ in length");
  std::vector<EvaluationRecord> out(covered.size());
  for (std::size_t i = 0; i < covered.size(); ++i) out[i] = {covered[i], groups[i], labels[i], 0.0, 0.0, 1};
  return out;
}

}  // namespace

PYBIND11_MODULE(bfqr, m) {
  m.doc() = "Binned fair quantile regression";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<EmptyInputError>(m, "EmptyInputError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("rows", &Dataset::rows)
      .def_readonly("cols", &Dataset::cols)
      .def_readonly("features", &Dataset::features)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("groups", &Dataset::groups)
      .def_readonly("group_count", &Dataset::group_count);

  m.def(
      "generate_synthetic",
      [](std::size_t n, std::uint64_t seed, const std::string& noise, bool abs_scale) {
        GeneratorOptions opt;
        if (noise == "uniform") opt.noise = NoiseKind::kUniform;
        else if (noise != "normal") throw ConfigError("noise must be 'normal' or 'uniform'");
        opt.abs_scale = abs_scale;
        return generate_synthetic(n, seed, opt);
      },
      py::arg("n"), py::arg("seed"), py::arg("noise") = "normal", py::arg("abs_scale") = false);

  m.def(
      "split",
      [](const Dataset& d, std::uint64_t seed) {
        auto s = split(d, {}, seed);
        return py::make_tuple(s.train, s.calibration, s.test);
      },
      py::arg("dataset"), py::arg("seed"));

  py::class_<BinPartition>(m, "BinPartition")
      .def_readonly("boundaries", &BinPartition::boundaries)
      .def_readonly("assignment", &BinPartition::assignment)
      .def_property_readonly("bin_count", &BinPartition::bin_count)
      .def("bin_of", &BinPartition::bin_of);
  m.def("make_equal_mass_bins", [](const std::vector<double>& y, std::size_t bins) {
    return make_equal_mass_bins(y, bins);
  });

  py::class_<QuantileModel>(m, "QuantileModel")
      .def_static(
          "fit",
          [](const std::vector<double>& x, std::size_t cols, const std::vector<double>& y, double lower,
             double upper, std::size_t iterations, std::uint64_t seed) {
            FitOptions fo;
            fo.iterations = iterations;
            fo.seed = seed;
            return QuantileModel::fit(x, cols, y, {lower, upper}, fo);
          },
          py::arg("features"), py::arg("cols"), py::arg("labels"), py::arg("lower") = 0.05,
          py::arg("upper") = 0.95, py::arg("iterations") = 2000, py::arg("seed") = 0)
      .def("predict_interval",
           [](const QuantileModel& q, const std::vector<double>& x) {
             auto iv = q.predict_interval(x);
             return Pair{iv.lower, iv.upper};
           })
      .def_property_readonly("lower_weights", &QuantileModel::lower_weights)
      .def_property_readonly("upper_weights", &QuantileModel::upper_weights)
      .def("serialize", &QuantileModel::serialize)
      .def_static("deserialize", [](const std::string& s) { return QuantileModel::deserialize(s); });

  m.def("conformity_score", [](double lo, double hi, double y) { return conformity_score(lo, hi, y); });
  m.def("conformal_quantile", [](const std::vector<double>& s, double level) { return conformal_quantile(s, level); });

  m.def("cqr_predict", [](const std::vector<double>& scores, double alpha, const Pair& raw) {
    return pieces(SplitCqr(scores, alpha).predict(to_interval(raw)));
  });
  m.def("gcqr_predict", [](const std::vector<std::vector<double>>& scores, double alpha, const Pair& raw,
                           int group) { return pieces(GroupCqr(scores, alpha).predict(to_interval(raw), group)); });
  m.def("lcqr_predict", [](const BinPartition& p, const std::vector<std::vector<double>>& bin_scores, double alpha,
                           const Pair& raw) { return pieces(LabelCqr(p, bin_scores, alpha).predict(to_interval(raw))); });

  py::class_<GroupBinQuantiles>(m, "GroupBinQuantiles")
      .def(py::init([](const std::vector<double>& scores, const std::vector<int>& groups,
                       const std::vector<std::size_t>& bins, int group_count, std::size_t bin_count) {
             auto recs = to_records(scores, groups, bins);
             return GroupBinQuantiles(recs, group_count, bin_count);
           }),
           py::arg("scores"), py::arg("groups"), py::arg("bins"), py::arg("group_count"), py::arg("bin_count"))
      .def("count", &GroupBinQuantiles::count)
      .def("lookup", &GroupBinQuantiles::lookup)
      .def_property_readonly("fallback_cells", &GroupBinQuantiles::fallback_cells);

  m.def("bfqr_interval",
        [](const Pair& raw, int group, const std::vector<double>& betas, const GroupBinQuantiles& gbq,
           const BinPartition& p) { return pieces(bfqr_interval(to_interval(raw), group, BetaVector(betas), gbq, p)); });
  m.def("hull", [](const std::vector<Pair>& u) {
    std::vector<Interval> iv;
    for (const auto& p : u) iv.push_back(to_interval(p));
    return pieces(hull_interval(IntervalUnion(iv)));
  });

  m.def(
      "init_betas",
      [](const std::vector<double>& scores, const std::vector<int>& groups, const BinPartition& p, double alpha) {
        std::vector<std::size_t> bins;
        for (std::size_t i = 0; i < scores.size(); ++i) bins.push_back(p.assignment.at(i));
        return init_betas(to_records(scores, groups, bins), p, alpha).values();
      },
      py::arg("scores"), py::arg("groups"), py::arg("partition"), py::arg("alpha"));

  m.def(
      "optimize",
      [](const GroupBinQuantiles& gbq, const BinPartition& p, const std::vector<Pair>& raw,
         const std::vector<int>& groups, const std::vector<double>& margins, const std::vector<double>& betas,
         double alpha, std::size_t max_iterations) {
        std::vector<OptimizationPoint> pts;
        for (std::size_t i = 0; i < raw.size(); ++i) {
          double q = margins.at(static_cast<std::size_t>(groups.at(i)));
          pts.push_back({to_interval(raw[i]), groups[i], raw[i].second - raw[i].first + 2 * q, q});
        }
        OptimizerState st(gbq, p, std::move(pts), BetaVector(betas));
        OptimizerOptions opt;
        opt.max_iterations = max_iterations;
        auto r = optimize(st, alpha, opt);
        py::list trace;
        for (const auto& t : r.trace)
          trace.append(py::make_tuple(t.iteration, t.objective.width, t.objective.bound));
        py::dict out;
        out["betas"] = r.betas.values();
        out["iterations"] = r.iterations;
        out["stop"] = std::string(to_string(r.stop));
        out["chain_violations"] = r.chain_violations;
        out["trace"] = trace;
        return out;
      },
      py::arg("quantiles"), py::arg("partition"), py::arg("raw"), py::arg("groups"), py::arg("margins"),
      py::arg("betas"), py::arg("alpha"), py::arg("max_iterations") = 200);

  m.def("mean_max_gap", [](const std::vector<bool>& covered, const std::vector<int>& groups,
                           const std::vector<double>& labels, std::size_t bins) {
    return mean_max_gap(to_eval(covered, groups, labels), bins);
  });
  m.def("t_statistic", [](const std::vector<bool>& covered, const std::vector<int>& groups,
                          const std::vector<double>& labels) {
    return t_statistic_exact(to_eval(covered, groups, labels)).value;
  });
  m.def("independence_estimate", [](const std::vector<int>& groups, const std::vector<int>& covered) {
    return independence_estimate(groups, covered);
  });

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        auto cfg = config_from_json(nlohmann::json::parse(config_json));
        cfg.validate();
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return report_json(r).dump();
      },
      py::arg("config_json"), "Run a sweep from a JSON config and return the JSON report.");
}
