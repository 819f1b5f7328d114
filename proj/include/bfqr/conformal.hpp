#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bfqr/dataset.hpp"
#include "bfqr/interval_union.hpp"
#include "bfqr/quantile_model.hpp"

namespace bfqr {

// Negative iff y is strictly inside (q_lo, q_hi).
inline double conformity_score(double q_lo, double q_hi, double y) {
  double a = q_lo - y;
  double b = y - q_hi;
  return a > b ? a : b;
}
inline double conformity_score(Interval raw, double y) { return conformity_score(raw.lower, raw.upper, y); }

// 1-based rank ceil(level * (n + 1)), without clamping.
std::size_t conformal_rank_unclamped(std::size_t n, double level);
// Same rank clamped to [1, n].
std::size_t conformal_rank(std::size_t n, double level);

double conformal_quantile(std::span<const double> scores, double level);

// Ascending copy of a score sequence for O(1) rank lookups.
class SortedScores {
 public:
  SortedScores() = default;
  explicit SortedScores(std::vector<double> scores);

  double quantile(double level) const;
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct ConformityRecord {
  double score = 0.0;
  int group = 0;
  std::size_t bin = 0;
  std::size_t index = 0;
};

// One record per calibration sample; bins come from the partition's member
// lists, which must have been built over the same labels.
std::vector<ConformityRecord> make_records(std::span<const Interval> raw, std::span<const double> labels,
                                           std::span<const int> groups, const BinPartition& partition);

class SplitCqr {
 public:
  SplitCqr(std::span<const double> scores, double alpha);
  double margin() const { return q_; }
  IntervalUnion predict(Interval raw) const;

 private:
  double q_;
};

class GroupCqr {
 public:
  // scores[a] holds the calibration scores of group a.
  GroupCqr(const std::vector<std::vector<double>>& scores, double alpha);
  GroupCqr(std::span<const ConformityRecord> records, int group_count, double alpha);
  double margin(int group) const;
  IntervalUnion predict(Interval raw, int group) const;

 private:
  std::vector<double> q_;
  std::vector<bool> present_;
};

// Per-bin group-blind margins, intersected with each bin.
class LabelCqr {
 public:
  LabelCqr(const BinPartition& partition, const std::vector<std::vector<double>>& bin_scores, double alpha);
  LabelCqr(const BinPartition& partition, std::span<const ConformityRecord> records, double alpha);
  double margin(std::size_t bin) const { return q_[bin]; }
  IntervalUnion predict(Interval raw) const;

 private:
  BinPartition partition_;
  std::vector<double> q_;
};

IntervalUnion cqr_predict(const QuantileModel& model, std::span<const double> cal_scores, double alpha,
                          std::span<const double> x);
IntervalUnion gcqr_predict(const QuantileModel& model, const std::vector<std::vector<double>>& group_scores,
                           double alpha, std::span<const double> x, int group);
IntervalUnion lcqr_predict(const QuantileModel& model, const BinPartition& partition,
                           const std::vector<std::vector<double>>& bin_scores, double alpha,
                           std::span<const double> x);

}  // namespace bfqr
