#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bfqr/beta_optimizer.hpp"
#include "bfqr/config.hpp"
#include "bfqr/dataset.hpp"
#include "bfqr/metrics.hpp"
#include "bfqr/quantile_model.hpp"

namespace bfqr {

struct MethodResult {
  Method method = Method::kCqr;
  MetricsReport metrics;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t train_size = 0, calibration_size = 0, test_size = 0;
  std::vector<MethodResult> methods;
  // Filled when BFQR or BFQR* ran.
  std::optional<BetaVector> initial_betas;
  std::optional<OptimizerResult> optimizer;
  std::size_t fallback_cells = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across seeds
  std::size_t count = 0;
};

struct AggregateTable {
  std::vector<Method> methods;
  std::vector<std::string> metrics;  // column order
  std::map<std::pair<Method, std::string>, MetricSummary> cells;
  std::size_t seeds_configured = 0;
  std::size_t seeds_completed = 0;

  const MetricSummary* find(Method m, const std::string& metric) const;
  double mean(Method m, const std::string& metric) const;
};

struct ExperimentResult {
  ExperimentConfig config;
  AggregateTable table;
  std::vector<SeedResult> seeds;

  bool all_ok() const;
};

// Base-model features for the given rows, optionally with the group id
// appended as a numeric column.
std::vector<double> model_features(const Dataset& data, std::span<const std::size_t> rows, bool group_feature);

// Stable 64-bit content hash (FNV-1a) used for the model cache.
std::uint64_t content_hash(std::span<const double> values, std::uint64_t seed = 1469598103934665603ull);

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const Dataset* loaded = nullptr);
AggregateTable aggregate(const ExperimentConfig& config, const std::vector<SeedResult>& seeds);
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace bfqr
