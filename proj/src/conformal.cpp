#include "bfqr/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "bfqr/bfqr_core.hpp"
#include "bfqr/errors.hpp"

namespace bfqr {

std::size_t conformal_rank_unclamped(std::size_t n, double level) {
  // The small offset keeps products like 0.9 * 10 from rounding up a rank.
  double x = level * static_cast<double>(n + 1) - 1e-9;
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(x));
}

std::size_t conformal_rank(std::size_t n, double level) {
  std::size_t k = conformal_rank_unclamped(n, level);
  return std::clamp<std::size_t>(k, 1, n);
}

double conformal_quantile(std::span<const double> scores, double level) {
  if (scores.empty()) throw EmptyInputError("conformal quantile of an empty score sequence");
  std::vector<double> copy(scores.begin(), scores.end());
  std::size_t k = conformal_rank(copy.size(), level);
  std::nth_element(copy.begin(), copy.begin() + (k - 1), copy.end());
  return copy[k - 1];
}

SortedScores::SortedScores(std::vector<double> scores) : values_(std::move(scores)) {
  std::sort(values_.begin(), values_.end());
}

double SortedScores::quantile(double level) const {
  if (values_.empty()) throw EmptyInputError("conformal quantile of an empty score sequence");
  return values_[conformal_rank(values_.size(), level) - 1];
}

std::vector<ConformityRecord> make_records(std::span<const Interval> raw, std::span<const double> labels,
                                           std::span<const int> groups, const BinPartition& partition) {
  if (raw.size() != labels.size() || groups.size() != labels.size() ||
      partition.assignment.size() != labels.size())
    throw ShapeError("calibration predictions, labels, groups and partition disagree in length");
  std::vector<ConformityRecord> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = {conformity_score(raw[i], labels[i]), groups[i], partition.assignment[i], i};
  return out;
}

SplitCqr::SplitCqr(std::span<const double> scores, double alpha) : q_(conformal_quantile(scores, 1.0 - alpha)) {}

IntervalUnion SplitCqr::predict(Interval raw) const {
  return IntervalUnion::single({raw.lower - q_, raw.upper + q_});
}

GroupCqr::GroupCqr(const std::vector<std::vector<double>>& scores, double alpha) {
  for (const auto& s : scores) {
    present_.push_back(!s.empty());
    q_.push_back(s.empty() ? 0.0 : conformal_quantile(s, 1.0 - alpha));
  }
}

namespace {

std::vector<std::vector<double>> by_group(std::span<const ConformityRecord> records, int group_count) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(group_count));
  for (const auto& r : records) {
    if (r.group < 0 || r.group >= group_count) throw ConfigError("record group outside [0, group_count)");
    out[static_cast<std::size_t>(r.group)].push_back(r.score);
  }
  return out;
}

std::vector<std::vector<double>> by_bin(std::span<const ConformityRecord> records, std::size_t bins) {
  std::vector<std::vector<double>> out(bins);
  for (const auto& r : records) {
    if (r.bin >= bins) throw ConfigError("record bin outside the partition");
    out[r.bin].push_back(r.score);
  }
  return out;
}

}  // namespace

GroupCqr::GroupCqr(std::span<const ConformityRecord> records, int group_count, double alpha)
    : GroupCqr(by_group(records, group_count), alpha) {}

double GroupCqr::margin(int group) const {
  if (group < 0 || static_cast<std::size_t>(group) >= q_.size() || !present_[static_cast<std::size_t>(group)])
    throw MissingGroupError(group);
  return q_[static_cast<std::size_t>(group)];
}

IntervalUnion GroupCqr::predict(Interval raw, int group) const {
  double q = margin(group);
  return IntervalUnion::single({raw.lower - q, raw.upper + q});
}

LabelCqr::LabelCqr(const BinPartition& partition, const std::vector<std::vector<double>>& bin_scores, double alpha)
    : partition_(partition) {
  if (bin_scores.size() != partition.bin_count()) throw ShapeError("one score sequence per bin required");
  for (std::size_t m = 0; m < bin_scores.size(); ++m) {
    if (bin_scores[m].empty()) throw ConfigError("bin " + std::to_string(m) + " has no calibration scores");
    q_.push_back(conformal_quantile(bin_scores[m], 1.0 - alpha));
  }
}

LabelCqr::LabelCqr(const BinPartition& partition, std::span<const ConformityRecord> records, double alpha)
    : LabelCqr(partition, by_bin(records, partition.bin_count()), alpha) {}

IntervalUnion LabelCqr::predict(Interval raw) const {
  std::vector<Interval> pieces;
  for (std::size_t m = 0; m < q_.size(); ++m)
    if (auto iv = bin_sub_interval(partition_, m, raw, q_[m])) pieces.push_back(*iv);
  return IntervalUnion(std::move(pieces));
}

IntervalUnion cqr_predict(const QuantileModel& model, std::span<const double> cal_scores, double alpha,
                          std::span<const double> x) {
  return SplitCqr(cal_scores, alpha).predict(model.predict_interval(x));
}

IntervalUnion gcqr_predict(const QuantileModel& model, const std::vector<std::vector<double>>& group_scores,
                           double alpha, std::span<const double> x, int group) {
  return GroupCqr(group_scores, alpha).predict(model.predict_interval(x), group);
}

IntervalUnion lcqr_predict(const QuantileModel& model, const BinPartition& partition,
                           const std::vector<std::vector<double>>& bin_scores, double alpha,
                           std::span<const double> x) {
  return LabelCqr(partition, bin_scores, alpha).predict(model.predict_interval(x));
}

}  // namespace bfqr
