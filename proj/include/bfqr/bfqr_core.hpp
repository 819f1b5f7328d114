#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bfqr/conformal.hpp"
#include "bfqr/dataset.hpp"
#include "bfqr/interval_union.hpp"

namespace bfqr {

// What lookup returns when ceil(beta * (n + 1)) exceeds the cell size n.
enum class RankOverflow {
  kUnbounded,  // +infinity: no finite score certifies level beta
  kClamp,      // the cell maximum
};

class GroupBinQuantiles {
 public:
  GroupBinQuantiles() = default;
  GroupBinQuantiles(std::span<const ConformityRecord> records, int group_count, std::size_t bins,
                    RankOverflow overflow = RankOverflow::kUnbounded);

  int group_count() const { return groups_; }
  std::size_t bin_count() const { return bins_; }
  RankOverflow overflow() const { return overflow_; }

  std::size_t count(int a, std::size_t m) const { return cells_[index(a, m)].size(); }
  std::size_t pooled_count(std::size_t m) const { return pooled_[m].size(); }
  std::size_t total() const { return total_; }
  bool uses_fallback(int a, std::size_t m) const { return cells_[index(a, m)].empty(); }
  // Empty cells among groups that occur in the calibration data.
  std::size_t fallback_cells() const { return fallback_cells_; }

  // Scores actually used for (a, m): the cell, or the pooled bin if empty.
  const std::vector<double>& effective(int a, std::size_t m) const;
  std::size_t effective_count(int a, std::size_t m) const { return effective(a, m).size(); }
  const std::vector<double>& cell(int a, std::size_t m) const { return cells_[index(a, m)]; }
  const std::vector<double>& pooled(std::size_t m) const { return pooled_[m]; }

  // G_{a,m}(beta) under the configured overflow rule.
  double lookup(int a, std::size_t m, double beta) const;
  // Rank clamped to [1, n]; used for slope estimates.
  double lookup_clamped(int a, std::size_t m, double beta) const;

 private:
  std::size_t index(int a, std::size_t m) const;

  int groups_ = 0;
  std::size_t bins_ = 0;
  RankOverflow overflow_ = RankOverflow::kUnbounded;
  std::size_t total_ = 0;
  std::size_t fallback_cells_ = 0;
  std::vector<std::vector<double>> cells_;
  std::vector<std::vector<double>> pooled_;
};

inline double lookup_G(const GroupBinQuantiles& gbq, int a, std::size_t m, double beta) {
  return gbq.lookup(a, m, beta);
}

class BetaVector {
 public:
  BetaVector() = default;
  explicit BetaVector(std::vector<double> values);
  // weights are normalized to sum to one.
  BetaVector(std::vector<double> values, std::vector<double> weights);
  static BetaVector constant(std::size_t bins, double value);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t m) const { return values_[m]; }
  void set(std::size_t m, double value) { values_[m] = value; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t m) const { return weights_[m]; }
  // Weighted mean; equals the plain mean for uniform weights.
  double mean() const;

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

// Bin m as a closed interval; the first and last bins extend to -inf / +inf.
Interval bin_extent(const BinPartition& partition, std::size_t m);

// B_m intersected with [raw.lower - g, raw.upper + g], or nothing.
std::optional<Interval> bin_sub_interval(const BinPartition& partition, std::size_t m, Interval raw, double g);

IntervalUnion bfqr_interval(Interval raw, int group, const BetaVector& betas, const GroupBinQuantiles& gbq,
                            const BinPartition& partition);
IntervalUnion bfqr_interval(std::span<const double> x, int group, const BetaVector& betas,
                            const GroupBinQuantiles& gbq, const BinPartition& partition,
                            const QuantileModel& model);

}  // namespace bfqr
