#include "bfqr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <spdlog/spdlog.h>

#include "bfqr/errors.hpp"

namespace bfqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> labels_of(std::span<const EvaluationRecord> records) {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.label);
  return y;
}

}  // namespace

GapResult mean_max_gap_detail(std::span<const EvaluationRecord> records, std::size_t bins) {
  if (records.empty()) throw EmptyInputError("mean max gap of no records");
  auto labels = labels_of(records);
  auto partition = make_equal_mass_bins(labels, std::min(bins, records.size()));
  GapResult out;
  double total = 0.0;
  for (const auto& members : partition.members) {
    std::map<int, std::pair<double, double>> cov;  // group -> (covered, count)
    for (std::size_t i : members) {
      auto& c = cov[records[i].group];
      c.first += records[i].covered ? 1.0 : 0.0;
      c.second += 1.0;
    }
    if (cov.size() < 2) {
      ++out.single_group_bins;
      continue;
    }
    double lo = 1.0, hi = 0.0;
    for (const auto& [g, c] : cov) {
      double rate = c.first / c.second;
      lo = std::min(lo, rate);
      hi = std::max(hi, rate);
    }
    total += hi - lo;
  }
  if (out.single_group_bins > 0)
    spdlog::debug("{} evaluation bins hold a single group; their gap is 0", out.single_group_bins);
  out.value = total / static_cast<double>(partition.bin_count());
  return out;
}

double independence_estimate(std::span<const int> groups, std::span<const int> covered) {
  const std::size_t n = groups.size();
  if (covered.size() != n) throw ShapeError("groups and coverage indicators differ in length");
  if (n < 4) throw ConfigError("independence estimate needs at least 4 points");
  std::map<int, double> count_a;
  double count_v[2] = {0.0, 0.0};
  std::map<std::pair<int, int>, double> count_av;
  for (std::size_t i = 0; i < n; ++i) {
    int v = covered[i] ? 1 : 0;
    count_a[groups[i]] += 1.0;
    count_v[v] += 1.0;
    count_av[{groups[i], v}] += 1.0;
  }
  const double s = static_cast<double>(n);
  // Row sums of the two distance matrices, their products, grand sums and
  // the elementwise product sum.
  double a_tot = 0.0, b_tot = 0.0, r = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int v = covered[i] ? 1 : 0;
    double ai = s - count_a[groups[i]];
    double bi = s - count_v[v];
    a_tot += ai;
    b_tot += bi;
    r += ai * bi;
    ab += s - count_a[groups[i]] - count_v[v] + count_av[{groups[i], v}];
  }
  double inner = ab + (a_tot * b_tot - 4.0 * r + 2.0 * ab) / ((s - 2.0) * (s - 3.0)) - 2.0 * (r - ab) / (s - 2.0);
  return inner / (s * (s - 1.0));
}

std::size_t t_bin_count(std::size_t n) {
  if (n == 0) return 1;
  double d = std::ceil(std::pow(static_cast<double>(n), 0.4) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(d), 1, n);
}

TResult t_statistic_exact(std::span<const EvaluationRecord> records) {
  if (records.empty()) throw EmptyInputError("T statistic of no records");
  auto labels = labels_of(records);
  TResult out;
  out.bins = t_bin_count(records.size());
  out.repeats = 1;
  auto partition = make_equal_mass_bins(labels, out.bins);
  std::vector<int> a, v;
  for (const auto& members : partition.members) {
    if (members.size() <= 4) {
      ++out.skipped_bins;
      continue;
    }
    a.clear();
    v.clear();
    for (std::size_t i : members) {
      a.push_back(records[i].group);
      v.push_back(records[i].covered ? 1 : 0);
    }
    out.value += static_cast<double>(members.size()) * independence_estimate(a, v);
  }
  return out;
}

TResult t_statistic(std::span<const EvaluationRecord> records, const TOptions& options) {
  if (records.empty()) throw EmptyInputError("T statistic of no records");
  if (!options.subsample || options.repeats == 0) return t_statistic_exact(records);
  std::mt19937_64 rng(options.seed);
  const std::size_t n = records.size();
  std::poisson_distribution<std::size_t> size_dist(static_cast<double>(n) / 2.0);
  std::vector<std::size_t> idx(n);
  TResult out;
  out.repeats = options.repeats;
  double total = 0.0;
  for (std::size_t rep = 0; rep < options.repeats; ++rep) {
    std::size_t z = std::min(size_dist(rng), n);
    z = std::max<std::size_t>(z, 1);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < z; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<EvaluationRecord> sample;
    sample.reserve(z);
    for (std::size_t i = 0; i < z; ++i) sample.push_back(records[idx[i]]);
    TResult one = t_statistic_exact(sample);
    total += one.value;
    out.bins = one.bins;
    out.skipped_bins = one.skipped_bins;
  }
  out.value = total / static_cast<double>(options.repeats);
  return out;
}

CoverageStats coverage_stats(std::span<const EvaluationRecord> records, int group_count) {
  if (records.empty()) throw EmptyInputError("coverage of no records");
  CoverageStats s;
  std::vector<double> hit(static_cast<std::size_t>(group_count), 0.0);
  s.group_counts.assign(static_cast<std::size_t>(group_count), 0);
  double covered = 0.0;
  for (const auto& r : records) {
    if (r.group < 0 || r.group >= group_count) throw ConfigError("record group outside [0, group_count)");
    double c = r.covered ? 1.0 : 0.0;
    covered += c;
    hit[static_cast<std::size_t>(r.group)] += c;
    ++s.group_counts[static_cast<std::size_t>(r.group)];
    s.mean_width += r.width;
    s.mean_hull_width += r.hull_width;
    s.mean_intervals += static_cast<double>(r.intervals);
  }
  const double n = static_cast<double>(records.size());
  s.marginal = covered / n;
  s.mean_width /= n;
  s.mean_hull_width /= n;
  s.mean_intervals /= n;
  s.per_group.resize(static_cast<std::size_t>(group_count));
  for (std::size_t a = 0; a < s.per_group.size(); ++a)
    s.per_group[a] = s.group_counts[a] ? hit[a] / static_cast<double>(s.group_counts[a]) : kNaN;
  return s;
}

std::vector<std::vector<double>> per_bin_coverage(std::span<const EvaluationRecord> records,
                                                  const BinPartition& partition, int group_count) {
  const std::size_t bins = partition.bin_count();
  const std::size_t k = static_cast<std::size_t>(group_count);
  std::vector<std::vector<double>> hit(bins, std::vector<double>(k, 0.0));
  std::vector<std::vector<double>> cnt(bins, std::vector<double>(k, 0.0));
  for (const auto& r : records) {
    std::size_t m = partition.bin_of(r.label);
    hit[m][static_cast<std::size_t>(r.group)] += r.covered ? 1.0 : 0.0;
    cnt[m][static_cast<std::size_t>(r.group)] += 1.0;
  }
  for (std::size_t m = 0; m < bins; ++m)
    for (std::size_t a = 0; a < k; ++a) hit[m][a] = cnt[m][a] > 0 ? hit[m][a] / cnt[m][a] : kNaN;
  return hit;
}

MetricsReport evaluate(std::span<const EvaluationRecord> records, int group_count, std::size_t gap_bins,
                       const TOptions& t_options, const BinPartition* coverage_partition) {
  MetricsReport m;
  m.coverage = coverage_stats(records, group_count);
  auto gap = mean_max_gap_detail(records, gap_bins);
  m.mean_max_gap = gap.value;
  m.single_group_bins = gap.single_group_bins;
  m.t = t_statistic(records, t_options);
  if (coverage_partition) m.bin_coverage = per_bin_coverage(records, *coverage_partition, group_count);
  return m;
}

}  // namespace bfqr
