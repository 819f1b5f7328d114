#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bfqr/beta_optimizer.hpp"
#include "bfqr/bfqr_core.hpp"
#include "bfqr/dataset.hpp"
#include "bfqr/quantile_model.hpp"

namespace bfqr {

enum class Method { kCqr, kGcqr, kLcqr, kBfqr, kBfqrHull };

const char* to_string(Method m);
Method parse_method(const std::string& name);
std::vector<Method> parse_methods(const std::string& list);
const std::vector<Method>& all_methods();

// "0-19", "3", "0,2,5-7".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

enum class DatasetKind { kSynthetic, kCsv };
enum class OptimizeOn { kTest, kCalibration };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynthetic;
  std::size_t n = 20000;
  GeneratorOptions generator;
  std::string path;
  CsvSchema schema;
};

struct ModelSpec {
  FitOptions fit;  // the seed is replaced per run
  QuantileLevels levels;
  // Append the group id as an extra numeric feature of the base model.
  bool group_feature = true;
};

struct OptimizerSpec {
  OptimizerOptions options;
  OptimizeOn on = OptimizeOn::kTest;
  bool weighted_bins = false;
  RankOverflow overflow = RankOverflow::kUnbounded;
};

struct MetricSpec {
  std::size_t gap_bins = 20;
  std::size_t t_repeats = 10;
  bool t_subsample = false;
};

struct OutputSpec {
  std::string dir;
  bool traces = true;
  std::string model_cache;  // directory; empty disables the disk cache
};

struct ExperimentConfig {
  DatasetSpec dataset;
  double alpha = 0.1;
  std::size_t bins = 20;
  std::vector<Method> methods = all_methods();
  std::vector<std::uint64_t> seeds = parse_seeds("0-99");
  SplitRatios split;
  ModelSpec model;
  OptimizerSpec optimizer;
  MetricSpec metrics;
  OutputSpec output;
  std::size_t threads = 1;

  void validate() const;
};

// Desk-scale preset: synthetic n=20000, seeds 0..19.
ExperimentConfig desk_preset();

// Fields absent from the document keep the values already in base.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

}  // namespace bfqr
