#include "bfqr/bfqr_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "bfqr/errors.hpp"

namespace bfqr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

GroupBinQuantiles::GroupBinQuantiles(std::span<const ConformityRecord> records, int group_count,
                                     std::size_t bins, RankOverflow overflow)
    : groups_(group_count), bins_(bins), overflow_(overflow), total_(records.size()) {
  if (group_count < 1) throw ConfigError("group count must be at least 1");
  if (bins < 1) throw ConfigError("bin count must be at least 1");
  cells_.resize(static_cast<std::size_t>(group_count) * bins);
  pooled_.resize(bins);
  std::vector<bool> seen(static_cast<std::size_t>(group_count), false);
  for (const auto& r : records) {
    if (r.group < 0 || r.group >= group_count) throw ConfigError("record group outside [0, group_count)");
    if (r.bin >= bins) throw ConfigError("record bin outside the partition");
    cells_[index(r.group, r.bin)].push_back(r.score);
    pooled_[r.bin].push_back(r.score);
    seen[static_cast<std::size_t>(r.group)] = true;
  }
  for (auto& c : cells_) std::sort(c.begin(), c.end());
  for (auto& c : pooled_) std::sort(c.begin(), c.end());
  for (int a = 0; a < group_count; ++a) {
    if (!seen[static_cast<std::size_t>(a)]) continue;
    for (std::size_t m = 0; m < bins; ++m) {
      if (!cells_[index(a, m)].empty()) continue;
      ++fallback_cells_;
      spdlog::warn("calibration cell (group {}, bin {}) is empty; using the pooled bin quantile", a, m);
    }
  }
}

std::size_t GroupBinQuantiles::index(int a, std::size_t m) const {
  if (a < 0 || a >= groups_ || m >= bins_) throw ShapeError("group/bin index out of range");
  return static_cast<std::size_t>(a) * bins_ + m;
}

const std::vector<double>& GroupBinQuantiles::effective(int a, std::size_t m) const {
  const auto& c = cells_[index(a, m)];
  if (!c.empty()) return c;
  if (pooled_[m].empty()) throw ConfigError("bin " + std::to_string(m) + " has no calibration scores");
  return pooled_[m];
}

double GroupBinQuantiles::lookup(int a, std::size_t m, double beta) const {
  const auto& s = effective(a, m);
  const std::size_t n = s.size();
  if (beta <= 0.0) return s.front() - 1e-9 * (1.0 + std::abs(s.front()));
  std::size_t k = conformal_rank_unclamped(n, beta);
  if (k > n) return overflow_ == RankOverflow::kUnbounded ? kInf : s.back();
  return s[std::max<std::size_t>(k, 1) - 1];
}

double GroupBinQuantiles::lookup_clamped(int a, std::size_t m, double beta) const {
  const auto& s = effective(a, m);
  return s[conformal_rank(s.size(), beta) - 1];
}

BetaVector::BetaVector(std::vector<double> values)
    : values_(std::move(values)), weights_(values_.size(), values_.empty() ? 0.0 : 1.0 / values_.size()) {}

BetaVector::BetaVector(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (weights_.size() != values_.size()) throw ShapeError("one weight per bin required");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("bin weights must be positive");
    total += w;
  }
  for (double& w : weights_) w /= total;
}

BetaVector BetaVector::constant(std::size_t bins, double value) {
  return BetaVector(std::vector<double>(bins, value));
}

double BetaVector::mean() const {
  double s = 0.0;
  for (std::size_t m = 0; m < values_.size(); ++m) s += weights_[m] * values_[m];
  return s;
}

Interval bin_extent(const BinPartition& partition, std::size_t m) {
  const std::size_t last = partition.bin_count() - 1;
  return {m == 0 ? -kInf : partition.lower(m), m == last ? kInf : partition.upper(m)};
}

std::optional<Interval> bin_sub_interval(const BinPartition& partition, std::size_t m, Interval raw, double g) {
  Interval ext = bin_extent(partition, m);
  double lo = std::max(ext.lower, raw.lower - g);
  double hi = std::min(ext.upper, raw.upper + g);
  if (!(lo <= hi)) return std::nullopt;
  // Bins are right-open except the last one.
  if (m + 1 < partition.bin_count() && lo >= ext.upper) return std::nullopt;
  return Interval{lo, hi};
}

IntervalUnion bfqr_interval(Interval raw, int group, const BetaVector& betas, const GroupBinQuantiles& gbq,
                            const BinPartition& partition) {
  if (betas.size() != partition.bin_count() || gbq.bin_count() != partition.bin_count())
    throw ShapeError("beta vector, quantile table and partition disagree on bin count");
  std::vector<Interval> pieces;
  pieces.reserve(partition.bin_count());
  for (std::size_t m = 0; m < partition.bin_count(); ++m)
    if (auto iv = bin_sub_interval(partition, m, raw, gbq.lookup(group, m, betas[m]))) pieces.push_back(*iv);
  return IntervalUnion(std::move(pieces));
}

IntervalUnion bfqr_interval(std::span<const double> x, int group, const BetaVector& betas,
                            const GroupBinQuantiles& gbq, const BinPartition& partition,
                            const QuantileModel& model) {
  return bfqr_interval(model.predict_interval(x), group, betas, gbq, partition);
}

}  // namespace bfqr
