#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bfqr/dataset.hpp"

namespace bfqr {

struct EvaluationRecord {
  bool covered = false;
  int group = 0;
  double label = 0.0;
  double width = 0.0;
  double hull_width = 0.0;
  std::size_t intervals = 0;
};

struct GapResult {
  double value = 0.0;
  std::size_t single_group_bins = 0;
};

GapResult mean_max_gap_detail(std::span<const EvaluationRecord> records, std::size_t bins);
inline double mean_max_gap(std::span<const EvaluationRecord> records, std::size_t bins) {
  return mean_max_gap_detail(records, bins).value;
}

// Unbiased distance-covariance estimate between group ids and coverage
// indicators of one bin, under the discrete metric. Needs at least 4 points.
double independence_estimate(std::span<const int> groups, std::span<const int> covered);

// ceil(n^(2/5)), at least 1 and at most n.
std::size_t t_bin_count(std::size_t n);

struct TOptions {
  std::size_t repeats = 10;
  bool subsample = false;
  std::uint64_t seed = 0;
};

struct TResult {
  double value = 0.0;  // mean over repeats
  std::size_t repeats = 0;
  std::size_t bins = 0;
  std::size_t skipped_bins = 0;  // bins with at most 4 points
};

// T on the full record set, no subsampling.
TResult t_statistic_exact(std::span<const EvaluationRecord> records);
TResult t_statistic(std::span<const EvaluationRecord> records, const TOptions& options = {});

struct CoverageStats {
  double marginal = 0.0;
  std::vector<double> per_group;  // NaN for groups without records
  std::vector<std::size_t> group_counts;
  double mean_width = 0.0;
  double mean_hull_width = 0.0;
  double mean_intervals = 0.0;
};

CoverageStats coverage_stats(std::span<const EvaluationRecord> records, int group_count);

// Coverage by (bin, group) over a given label partition; NaN where empty.
std::vector<std::vector<double>> per_bin_coverage(std::span<const EvaluationRecord> records,
                                                  const BinPartition& partition, int group_count);

struct MetricsReport {
  CoverageStats coverage;
  double mean_max_gap = 0.0;
  std::size_t single_group_bins = 0;
  TResult t;
  std::vector<std::vector<double>> bin_coverage;
  std::size_t fallback_cells = 0;
};

MetricsReport evaluate(std::span<const EvaluationRecord> records, int group_count, std::size_t gap_bins,
                       const TOptions& t_options, const BinPartition* coverage_partition = nullptr);

}  // namespace bfqr
