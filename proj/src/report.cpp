#include "bfqr/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bfqr/errors.hpp"

namespace bfqr {

namespace fs = std::filesystem;

bool scaled_metric(const std::string& metric) {
  return metric == "marginal_coverage" || metric.rfind("coverage_group_", 0) == 0 || metric == "mean_max_gap" ||
         metric == "t_statistic";
}

namespace {

std::string cell_text(const MetricSummary& s, double scale) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", s.mean * scale, s.std * scale);
  return buf;
}

// Display width of a UTF-8 string.
std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++w;
  return w;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string(), "cannot open for writing");
  f << content;
  if (!f) throw IoError(path.string(), "write failed");
}

}  // namespace

std::string format_table(const AggregateTable& table) {
  std::vector<std::string> cols;
  for (const auto& m : table.metrics) {
    bool any = false;
    for (Method me : table.methods) any |= table.find(me, m) != nullptr;
    if (any) cols.push_back(m);
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"method"};
  for (const auto& c : cols) header.push_back(c + (scaled_metric(c) ? " (x100)" : ""));
  rows.push_back(header);
  for (Method me : table.methods) {
    std::vector<std::string> r{to_string(me)};
    for (const auto& c : cols) {
      const auto* s = table.find(me, c);
      r.push_back(s ? cell_text(*s, scaled_metric(c) ? 100.0 : 1.0) : "-");
    }
    rows.push_back(r);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], display_width(r[j]));
  std::ostringstream os;
  os << "seeds completed: " << table.seeds_completed << " / " << table.seeds_configured << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const auto& s = rows[i][j];
      std::string pad(width[j] - display_width(s), ' ');
      os << (j ? "  " : "") << (j ? pad + s : s + pad);
    }
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

nlohmann::ordered_json report_json(const ExperimentResult& result) {
  using oj = nlohmann::ordered_json;
  const auto& t = result.table;
  oj j;
  j["format"] = "bfqr-report/1";
  j["config"] = config_to_json(result.config);
  j["seeds_configured"] = t.seeds_configured;
  j["seeds_completed"] = t.seeds_completed;
  oj failed = oj::array();
  for (const auto& s : result.seeds)
    if (!s.ok) failed.push_back({{"seed", s.seed}, {"error", s.error}});
  j["failed_seeds"] = failed;

  oj methods = oj::array();
  for (Method me : t.methods) {
    oj metrics = oj::object();
    for (const auto& name : t.metrics) {
      const auto* s = t.find(me, name);
      if (!s) continue;
      oj cell{{"mean", s->mean}, {"std", s->std}, {"count", s->count}};
      if (scaled_metric(name)) {
        cell["mean_x100"] = s->mean * 100.0;
        cell["std_x100"] = s->std * 100.0;
      }
      metrics[name] = cell;
    }
    methods.push_back({{"method", to_string(me)}, {"metrics", metrics}});
  }
  j["methods"] = methods;

  oj per_seed = oj::array();
  for (const auto& s : result.seeds) {
    oj e;
    e["seed"] = s.seed;
    e["ok"] = s.ok;
    if (!s.ok) {
      e["error"] = s.error;
      per_seed.push_back(e);
      continue;
    }
    e["split"] = {s.train_size, s.calibration_size, s.test_size};
    e["fallback_cells"] = s.fallback_cells;
    oj ms = oj::object();
    for (const auto& mr : s.methods) {
      const auto& r = mr.metrics;
      oj m;
      m["marginal_coverage"] = r.coverage.marginal;
      m["coverage_by_group"] = r.coverage.per_group;
      m["group_counts"] = r.coverage.group_counts;
      m["mean_width"] = r.coverage.mean_width;
      m["mean_hull_width"] = r.coverage.mean_hull_width;
      m["mean_interval_count"] = r.coverage.mean_intervals;
      m["mean_max_gap"] = r.mean_max_gap;
      m["single_group_bins"] = r.single_group_bins;
      m["t_statistic"] = r.t.value;
      m["t_repeats"] = r.t.repeats;
      m["t_bins"] = r.t.bins;
      m["t_skipped_bins"] = r.t.skipped_bins;
      m["bin_coverage"] = r.bin_coverage;
      ms[to_string(mr.method)] = m;
    }
    e["methods"] = ms;
    if (s.optimizer) {
      const auto& o = *s.optimizer;
      e["optimizer"] = {{"iterations", o.iterations},
                        {"stop", to_string(o.stop)},
                        {"evaluations", o.evaluations},
                        {"rejected_steps", o.rejected_steps},
                        {"chain_violations", o.chain_violations},
                        {"initial_betas", s.initial_betas ? s.initial_betas->values() : std::vector<double>{}},
                        {"final_betas", o.betas.values()}};
    }
    per_seed.push_back(e);
  }
  j["per_seed"] = per_seed;
  return j;
}

std::string format_trace(const OptimizerResult& result) {
  std::ostringstream os;
  os.precision(10);
  os << "iteration\twidth\tdummy_bound\n";
  for (const auto& e : result.trace) os << e.iteration << '\t' << e.objective.width << '\t' << e.objective.bound << '\n';
  return os.str();
}

ReportPaths emit_report(const ExperimentResult& result, const std::string& dir, bool traces) {
  ReportPaths paths;
  fs::path root(dir.empty() ? "." : dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(root.string(), ec.message());
  paths.table = (root / "report.txt").string();
  paths.json = (root / "report.json").string();
  write_file(paths.table, format_table(result.table));
  write_file(paths.json, report_json(result).dump(2) + "\n");
  if (traces) {
    fs::path tdir = root / "traces";
    bool made = false;
    for (const auto& s : result.seeds) {
      if (!s.optimizer) continue;
      if (!made) {
        fs::create_directories(tdir, ec);
        if (ec) throw IoError(tdir.string(), ec.message());
        made = true;
      }
      fs::path p = tdir / ("seed_" + std::to_string(s.seed) + ".tsv");
      write_file(p, format_trace(*s.optimizer));
      paths.traces.push_back(p.string());
    }
  }
  return paths;
}

}  // namespace bfqr
