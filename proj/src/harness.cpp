#include "bfqr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <thread>

#include <spdlog/spdlog.h>

#include "bfqr/bfqr_core.hpp"
#include "bfqr/conformal.hpp"
#include "bfqr/errors.hpp"

namespace bfqr {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix(seed * 0x100000001B3ull + stream); }

std::vector<std::string> metric_order(int groups) {
  std::vector<std::string> m{"marginal_coverage"};
  for (int a = 0; a < groups; ++a) m.push_back("coverage_group_" + std::to_string(a));
  for (const char* k : {"mean_width", "mean_hull_width", "mean_max_gap", "t_statistic", "mean_interval_count",
                        "optimizer_iterations", "fallback_cells"})
    m.emplace_back(k);
  return m;
}

QuantileModel fit_cached(const ExperimentConfig& config, std::span<const double> x, std::size_t cols,
                         std::span<const double> y, std::uint64_t fit_seed) {
  FitOptions fit = config.model.fit;
  fit.seed = fit_seed;
  std::string path;
  if (!config.output.model_cache.empty()) {
    std::vector<double> key{static_cast<double>(cols), fit.learning_rate, static_cast<double>(fit.iterations),
                            static_cast<double>(fit.batch_size), static_cast<double>(fit.seed),
                            config.model.levels.lower, config.model.levels.upper};
    std::uint64_t h = content_hash(key, content_hash(y, content_hash(x)));
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.model", static_cast<unsigned long long>(h));
    std::filesystem::create_directories(config.output.model_cache);
    path = (std::filesystem::path(config.output.model_cache) / name).string();
    if (std::filesystem::exists(path)) {
      try {
        return QuantileModel::load(path);
      } catch (const Error& e) {
        spdlog::warn("ignoring unreadable cached model {}: {}", path, e.what());
      }
    }
  }
  QuantileModel model = QuantileModel::fit(x, cols, y, config.model.levels, fit);
  if (!path.empty()) model.save(path);
  return model;
}

EvaluationRecord record_for(const IntervalUnion& u, int group, double y) {
  return {u.covers(y), group, y, u.total_width(), u.hull_width(), u.size()};
}

}  // namespace

std::uint64_t content_hash(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::vector<double> model_features(const Dataset& data, std::span<const std::size_t> rows, bool group_feature) {
  const std::size_t cols = data.cols + (group_feature ? 1 : 0);
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (std::size_t i : rows) {
    auto r = data.row(i);
    out.insert(out.end(), r.begin(), r.end());
    if (group_feature) out.push_back(static_cast<double>(data.groups[i]));
  }
  return out;
}

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const Dataset* loaded) {
  SeedResult res;
  res.seed = seed;
  try {
    Dataset generated;
    if (config.dataset.kind == DatasetKind::kSynthetic) {
      generated = generate_synthetic(config.dataset.n, seed, config.dataset.generator);
      loaded = &generated;
    } else if (!loaded) {
      generated = load_csv(config.dataset.path, config.dataset.schema);
      loaded = &generated;
    }
    const Dataset& data = *loaded;
    data.validate();
    const int groups = data.group_count;

    SplitIndices idx = split(data, config.split, stream_seed(seed, 1));
    res.train_size = idx.train.size();
    res.calibration_size = idx.calibration.size();
    res.test_size = idx.test.size();
    if (idx.train.empty() || idx.calibration.empty() || idx.test.empty())
      throw EmptyInputError("a split is empty; increase n");

    const bool gf = config.model.group_feature;
    const std::size_t cols = data.cols + (gf ? 1 : 0);
    auto train_x = model_features(data, idx.train, gf);
    std::vector<double> train_y;
    for (std::size_t i : idx.train) train_y.push_back(data.labels[i]);
    QuantileModel model = fit_cached(config, train_x, cols, train_y, stream_seed(seed, 2));

    auto predict_rows = [&](const std::vector<std::size_t>& rows) {
      auto x = model_features(data, rows, gf);
      std::vector<Interval> out(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k)
        out[k] = model.predict_interval(std::span<const double>(x).subspan(k * cols, cols));
      return out;
    };
    auto cal_raw = predict_rows(idx.calibration);
    auto test_raw = predict_rows(idx.test);
    std::vector<double> cal_y, test_y;
    std::vector<int> cal_a, test_a;
    for (std::size_t i : idx.calibration) cal_y.push_back(data.labels[i]), cal_a.push_back(data.groups[i]);
    for (std::size_t i : idx.test) test_y.push_back(data.labels[i]), test_a.push_back(data.groups[i]);

    BinPartition partition = make_equal_mass_bins(cal_y, config.bins);
    auto records = make_records(cal_raw, cal_y, cal_a, partition);
    std::vector<double> scores;
    for (const auto& r : records) scores.push_back(r.score);

    TOptions topt{config.metrics.t_repeats, config.metrics.t_subsample, stream_seed(seed, 3)};
    auto finish = [&](Method m, const std::vector<EvaluationRecord>& ev) {
      MethodResult mr{m, evaluate(ev, groups, config.metrics.gap_bins, topt, &partition)};
      res.methods.push_back(std::move(mr));
    };

    bool want_bfqr = false;
    for (Method m : config.methods) want_bfqr |= (m == Method::kBfqr || m == Method::kBfqrHull);
    std::vector<IntervalUnion> bfqr_sets;
    if (want_bfqr) {
      GroupBinQuantiles gbq(records, groups, config.bins, config.optimizer.overflow);
      res.fallback_cells = gbq.fallback_cells();
      BetaVector betas = init_betas(records, partition, config.alpha, config.optimizer.weighted_bins);
      res.initial_betas = betas;

      // Group margins fold into the start widths of the width bound.
      const double pooled = conformal_quantile(scores, 1.0 - config.alpha);
      std::vector<std::vector<double>> by_group(static_cast<std::size_t>(groups));
      for (const auto& r : records) by_group[static_cast<std::size_t>(r.group)].push_back(r.score);
      std::vector<double> margin(static_cast<std::size_t>(groups), pooled);
      for (std::size_t a = 0; a < by_group.size(); ++a)
        if (!by_group[a].empty()) margin[a] = conformal_quantile(by_group[a], 1.0 - config.alpha);

      const bool on_test = config.optimizer.on == OptimizeOn::kTest;
      const auto& opt_raw = on_test ? test_raw : cal_raw;
      const auto& opt_a = on_test ? test_a : cal_a;
      std::vector<OptimizationPoint> points(opt_raw.size());
      for (std::size_t k = 0; k < opt_raw.size(); ++k) {
        double q = margin[static_cast<std::size_t>(opt_a[k])];
        points[k] = {opt_raw[k], opt_a[k], opt_raw[k].width() + 2.0 * q, q};
      }
      OptimizerState state(gbq, partition, std::move(points), betas);
      res.optimizer = optimize(state, config.alpha, config.optimizer.options);
      for (std::size_t k = 0; k < test_raw.size(); ++k)
        bfqr_sets.push_back(bfqr_interval(test_raw[k], test_a[k], res.optimizer->betas, gbq, partition));
    }

    for (Method m : config.methods) {
      std::vector<EvaluationRecord> ev(test_raw.size());
      switch (m) {
        case Method::kCqr: {
          SplitCqr p(scores, config.alpha);
          for (std::size_t k = 0; k < ev.size(); ++k) ev[k] = record_for(p.predict(test_raw[k]), test_a[k], test_y[k]);
          break;
        }
        case Method::kGcqr: {
          GroupCqr p(records, groups, config.alpha);
          for (std::size_t k = 0; k < ev.size(); ++k)
            ev[k] = record_for(p.predict(test_raw[k], test_a[k]), test_a[k], test_y[k]);
          break;
        }
        case Method::kLcqr: {
          LabelCqr p(partition, records, config.alpha);
          for (std::size_t k = 0; k < ev.size(); ++k) ev[k] = record_for(p.predict(test_raw[k]), test_a[k], test_y[k]);
          break;
        }
        case Method::kBfqr:
          for (std::size_t k = 0; k < ev.size(); ++k) ev[k] = record_for(bfqr_sets[k], test_a[k], test_y[k]);
          break;
        case Method::kBfqrHull:
          for (std::size_t k = 0; k < ev.size(); ++k)
            ev[k] = record_for(hull_interval(bfqr_sets[k]), test_a[k], test_y[k]);
          break;
      }
      finish(m, ev);
      res.methods.back().metrics.fallback_cells = res.fallback_cells;
    }
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
    res.methods.clear();
    spdlog::error("seed {} failed: {}", seed, e.what());
  }
  return res;
}

const MetricSummary* AggregateTable::find(Method m, const std::string& metric) const {
  auto it = cells.find({m, metric});
  return it == cells.end() ? nullptr : &it->second;
}

double AggregateTable::mean(Method m, const std::string& metric) const {
  const auto* s = find(m, metric);
  return s ? s->mean : std::numeric_limits<double>::quiet_NaN();
}

bool ExperimentResult::all_ok() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return s.ok; });
}

AggregateTable aggregate(const ExperimentConfig& config, const std::vector<SeedResult>& seeds) {
  AggregateTable t;
  t.methods = config.methods;
  t.seeds_configured = seeds.size();
  int groups = 0;
  for (const auto& s : seeds) {
    if (!s.ok) continue;
    ++t.seeds_completed;
    for (const auto& m : s.methods) groups = std::max(groups, static_cast<int>(m.metrics.coverage.per_group.size()));
  }
  t.metrics = metric_order(groups);

  std::map<std::pair<Method, std::string>, std::vector<double>> values;
  for (const auto& s : seeds) {
    if (!s.ok) continue;
    for (const auto& mr : s.methods) {
      const auto& r = mr.metrics;
      auto put = [&](const std::string& k, double v) {
        if (!std::isnan(v)) values[{mr.method, k}].push_back(v);
      };
      put("marginal_coverage", r.coverage.marginal);
      for (std::size_t a = 0; a < r.coverage.per_group.size(); ++a)
        put("coverage_group_" + std::to_string(a), r.coverage.per_group[a]);
      put("mean_width", r.coverage.mean_width);
      put("mean_hull_width", r.coverage.mean_hull_width);
      put("mean_max_gap", r.mean_max_gap);
      put("t_statistic", r.t.value);
      put("mean_interval_count", r.coverage.mean_intervals);
      if ((mr.method == Method::kBfqr || mr.method == Method::kBfqrHull) && s.optimizer) {
        put("optimizer_iterations", static_cast<double>(s.optimizer->iterations));
        put("fallback_cells", static_cast<double>(s.fallback_cells));
      }
    }
  }
  for (const auto& [key, v] : values) {
    MetricSummary ms;
    ms.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    ms.mean = sum / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - ms.mean) * (x - ms.mean);
    ms.std = std::sqrt(var / static_cast<double>(v.size()));
    if (!std::isfinite(ms.mean)) ms.std = std::numeric_limits<double>::quiet_NaN();
    t.cells[key] = ms;
  }
  return t;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult out;
  out.config = config;
  Dataset loaded;
  const Dataset* shared = nullptr;
  if (config.dataset.kind == DatasetKind::kCsv) {
    loaded = load_csv(config.dataset.path, config.dataset.schema);
    shared = &loaded;
  }
  out.seeds.resize(config.seeds.size());
  const std::size_t workers = std::min(config.threads, config.seeds.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < config.seeds.size(); ++k) out.seeds[k] = run_seed(config, config.seeds[k], shared);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < config.seeds.size();)
          out.seeds[k] = run_seed(config, config.seeds[k], shared);
      });
    for (auto& th : pool) th.join();
  }
  out.table = aggregate(config, out.seeds);
  return out;
}

}  // namespace bfqr
