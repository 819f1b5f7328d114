#include "bfqr/beta_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <spdlog/spdlog.h>

#include "bfqr/errors.hpp"

namespace bfqr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_empty(const Interval& iv) { return !(iv.lower <= iv.upper); }

bool no_greater(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return false;
  if (a <= b) return true;
  return a - b <= 1e-12 * std::max(1.0, std::abs(b));
}

}  // namespace

BetaVector project_to_mean(const BetaVector& betas, double target) {
  if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("target coverage must lie in [0,1]");
  const std::size_t m = betas.size();
  auto shifted = [&](double c) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += betas.weight(k) * std::clamp(betas[k] + c, 0.0, 1.0);
    return s;
  };
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (shifted(mid) < target ? lo : hi) = mid;
  }
  double c = std::abs(shifted(lo) - target) <= std::abs(shifted(hi) - target) ? lo : hi;
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k) out[k] = std::clamp(betas[k] + c, 0.0, 1.0);
  // Put any rounding residue on one unclipped bin.
  BetaVector result(out, betas.weights());
  double residue = target - result.mean();
  for (std::size_t k = 0; k < m && residue != 0.0; ++k) {
    double v = out[k] + residue / betas.weight(k);
    if (v > 0.0 && v < 1.0) {
      out[k] = v;
      break;
    }
  }
  return BetaVector(out, betas.weights());
}

std::vector<double> bin_mass_weights(const BinPartition& partition) {
  std::vector<double> w(partition.bin_count());
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = static_cast<double>(partition.members[m].size());
  return w;
}

BetaVector init_betas(std::span<const ConformityRecord> records, const BinPartition& partition, double alpha,
                      bool weighted_bins) {
  if (records.empty()) throw EmptyInputError("init_betas needs calibration records");
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(r.score);
  const double q = conformal_quantile(scores, 1.0 - alpha);
  const std::size_t bins = partition.bin_count();
  std::vector<double> hit(bins, 0.0), total(bins, 0.0);
  for (const auto& r : records) {
    if (r.bin >= bins) throw ConfigError("record bin outside the partition");
    total[r.bin] += 1.0;
    if (r.score <= q) hit[r.bin] += 1.0;
  }
  std::vector<double> beta(bins);
  for (std::size_t m = 0; m < bins; ++m) beta[m] = total[m] > 0 ? hit[m] / total[m] : 1.0 - alpha;
  BetaVector start = weighted_bins ? BetaVector(beta, bin_mass_weights(partition)) : BetaVector(beta);
  return project_to_mean(start, 1.0 - alpha);
}

Slopes estimate_slopes(const GroupBinQuantiles& gbq, int a, std::size_t m, double beta, double delta) {
  if (!(delta > 0.0)) throw ConfigError("slope step must be positive");
  Slopes s;
  if (gbq.effective_count(a, m) < 2) {
    s.degenerate = true;
    return s;
  }
  const double g = gbq.lookup_clamped(a, m, beta);
  if (beta < 1.0) {
    double hi = std::min(beta + delta, 1.0);
    s.plus = (gbq.lookup_clamped(a, m, hi) - g) / (hi - beta);
  }
  if (beta > 0.0) {
    double lo = std::max(beta - delta, 0.0);
    s.minus = (g - gbq.lookup_clamped(a, m, lo)) / (beta - lo);
  }
  return s;
}

OptimizerState::OptimizerState(const GroupBinQuantiles& gbq, const BinPartition& partition,
                               std::vector<OptimizationPoint> points, BetaVector betas)
    : gbq_(&gbq),
      partition_(&partition),
      points_(std::move(points)),
      betas_(std::move(betas)),
      bins_(partition.bin_count()),
      groups_(gbq.group_count()) {
  if (betas_.size() != bins_ || gbq.bin_count() != bins_)
    throw ShapeError("beta vector, quantile table and partition disagree on bin count");
  for (const auto& p : points_)
    if (p.group < 0 || p.group >= groups_) throw ConfigError("optimization point group out of range");
  bin_extent_.resize(bins_);
  for (std::size_t m = 0; m < bins_; ++m) bin_extent_[m] = bin_extent(partition, m);
  g_.assign(static_cast<std::size_t>(groups_) * bins_, 0.0);
  for (std::size_t m = 0; m < bins_; ++m) refresh_bin(m);

  const std::size_t n = points_.size();
  sub_.assign(n * bins_, Interval{1.0, 0.0});
  first_.assign(n, bins_);
  last_.assign(n, bins_);
  width_.assign(n, 0.0);
  hull_.assign(n, 0.0);
  bound_.assign(n, 0.0);
  counters_.assign(static_cast<std::size_t>(groups_) * bins_, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < bins_; ++m) {
      const auto& pt = points_[i];
      double g = g_[static_cast<std::size_t>(pt.group) * bins_ + m];
      auto iv = bin_sub_interval(partition, m, pt.raw, g);
      sub_[i * bins_ + m] = iv ? *iv : Interval{1.0, 0.0};
    }
    refresh_point(i, bins_, bins_);
  }
  recompute_objective();
}

void OptimizerState::refresh_bin(std::size_t m) {
  for (int a = 0; a < groups_; ++a)
    g_[static_cast<std::size_t>(a) * bins_ + m] = gbq_->lookup(a, m, betas_[m]);
}

void OptimizerState::add_contribution(std::size_t i, int sign) {
  if (first_[i] == bins_) return;
  const std::size_t base = static_cast<std::size_t>(points_[i].group) * bins_;
  for (std::size_t m = 0; m < bins_; ++m) {
    const Interval& iv = sub_[i * bins_ + m];
    bool partial = !is_empty(iv) && !(iv == bin_extent_[m]);
    if (partial || m == first_[i] || m == last_[i]) counters_[base + m] += static_cast<std::size_t>(sign);
  }
}

void OptimizerState::refresh_point(std::size_t i, std::size_t m1, std::size_t m2) {
  add_contribution(i, -1);
  const auto& pt = points_[i];
  const std::size_t base = static_cast<std::size_t>(pt.group) * bins_;
  for (std::size_t m : {m1, m2}) {
    if (m >= bins_) continue;
    auto iv = bin_sub_interval(*partition_, m, pt.raw, g_[base + m]);
    sub_[i * bins_ + m] = iv ? *iv : Interval{1.0, 0.0};
  }
  std::size_t first = bins_, last = bins_;
  double width = 0.0;
  for (std::size_t m = 0; m < bins_; ++m) {
    const Interval& iv = sub_[i * bins_ + m];
    if (is_empty(iv)) continue;
    if (first == bins_) first = m;
    last = m;
    width += iv.width();
  }
  first_[i] = first;
  last_[i] = last;
  if (first == bins_) {
    width_[i] = hull_[i] = bound_[i] = 0.0;
  } else {
    width_[i] = width;
    hull_[i] = sub_[i * bins_ + last].upper - sub_[i * bins_ + first].lower;
    // A saturated boundary bin contributes the reach to its outer edge.
    double g_lo = g_[base + first];
    double g_hi = g_[base + last];
    double ext_lo = std::isfinite(g_lo) ? g_lo : pt.raw.lower - bin_extent_[first].lower;
    double ext_hi = std::isfinite(g_hi) ? g_hi : bin_extent_[last].upper - pt.raw.upper;
    bound_[i] = pt.start_width + ext_lo + ext_hi - 2.0 * pt.margin;
  }
  add_contribution(i, +1);
}

void OptimizerState::recompute_objective() {
  Objective o;
  const std::size_t n = points_.size();
  for (std::size_t i = 0; i < n; ++i) {
    o.width += width_[i];
    o.hull_width += hull_[i];
    o.bound += bound_[i];
  }
  if (n > 0) {
    o.width /= static_cast<double>(n);
    o.hull_width /= static_cast<double>(n);
    o.bound /= static_cast<double>(n);
  }
  objective_ = o;
}

void OptimizerState::set_beta(std::size_t m, double value) { set_betas(m, value, bins_, 0.0); }

void OptimizerState::set_betas(std::size_t p, double vp, std::size_t q, double vq) {
  if (p >= bins_) throw ShapeError("bin index out of range");
  betas_.set(p, std::clamp(vp, 0.0, 1.0));
  refresh_bin(p);
  if (q < bins_) {
    betas_.set(q, std::clamp(vq, 0.0, 1.0));
    refresh_bin(q);
  }
  for (std::size_t i = 0; i < points_.size(); ++i) refresh_point(i, p, q);
  recompute_objective();
}

std::vector<BinGradient> approx_gradients(const OptimizerState& state, std::size_t* degenerate_cells) {
  const std::size_t bins = state.bin_count();
  std::vector<BinGradient> out(bins);
  std::size_t degenerate = 0;
  const double n = static_cast<double>(std::max<std::size_t>(state.point_count(), 1));
  for (std::size_t m = 0; m < bins; ++m) {
    for (int a = 0; a < state.group_count(); ++a) {
      std::size_t u = state.counter(a, m);
      if (u == 0) continue;
      double delta = 1.0 / static_cast<double>(state.quantiles().effective_count(a, m) + 1);
      Slopes s = estimate_slopes(state.quantiles(), a, m, state.betas()[m], delta);
      if (s.degenerate) ++degenerate;
      out[m].plus += static_cast<double>(u) * s.plus / n;
      out[m].minus += static_cast<double>(u) * s.minus / n;
    }
  }
  if (degenerate_cells) *degenerate_cells = degenerate;
  return out;
}

double default_cell_epsilon(const std::vector<double>& s) {
  const std::size_t n = s.size();
  if (n < 2) return 0.0;
  auto quartile = [&](double p) {
    double pos = p * static_cast<double>(n - 1);
    std::size_t k = static_cast<std::size_t>(std::floor(pos));
    double frac = pos - static_cast<double>(k);
    return k + 1 < n ? s[k] + frac * (s[k + 1] - s[k]) : s[k];
  };
  return (quartile(0.75) - quartile(0.25)) / std::sqrt(static_cast<double>(n));
}

Objective evaluate_objective(const BetaVector& betas, const GroupBinQuantiles& gbq, const BinPartition& partition,
                             std::span<const OptimizationPoint> points) {
  OptimizerState state(gbq, partition, std::vector<OptimizationPoint>(points.begin(), points.end()), betas);
  return state.objective();
}

double dummy_width_bound(const BetaVector& betas, const GroupBinQuantiles& gbq, const BinPartition& partition,
                         std::span<const OptimizationPoint> points) {
  return evaluate_objective(betas, gbq, partition, points).bound;
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kNoIterations: return "no-iterations";
    case StopReason::kConverged: return "converged";
    case StopReason::kNoImprovingStep: return "no-improving-step";
    case StopReason::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

OptimizerResult optimize(OptimizerState& state, double alpha, const OptimizerOptions& options) {
  OptimizerResult result;
  const std::size_t bins = state.bin_count();
  const int groups = state.group_count();
  const GroupBinQuantiles& gbq = state.quantiles();
  if (std::abs(state.betas().mean() - (1.0 - alpha)) > 1e-9)
    spdlog::warn("optimizer started from betas with mean {} (target {})", state.betas().mean(), 1.0 - alpha);

  auto check_chain = [&](const Objective& o) {
    ++result.evaluations;
    if (!no_greater(o.width, o.hull_width) || !no_greater(o.hull_width, o.bound)) ++result.chain_violations;
  };
  check_chain(state.objective());
  result.trace.push_back({0, state.objective()});

  // Per-cell slope error and rank step; both are fixed by the calibration data.
  std::vector<double> cell_eps(static_cast<std::size_t>(groups) * bins, 0.0);
  std::vector<double> rank_step(bins, 1.0);
  std::vector<bool> present(static_cast<std::size_t>(groups), false);
  for (int a = 0; a < groups; ++a)
    for (std::size_t m = 0; m < bins; ++m)
      if (gbq.count(a, m) > 0) present[static_cast<std::size_t>(a)] = true;
  for (std::size_t m = 0; m < bins; ++m) {
    for (int a = 0; a < groups; ++a) {
      if (!present[static_cast<std::size_t>(a)]) continue;
      const auto& cell = gbq.effective(a, m);
      cell_eps[static_cast<std::size_t>(a) * bins + m] = default_cell_epsilon(cell);
      rank_step[m] = std::min(rank_step[m], 1.0 / static_cast<double>(cell.size() + 1));
    }
  }
  // Steps are in units of mean-beta mass; scale converts them to a bin's beta.
  std::vector<double> scale(bins);
  for (std::size_t m = 0; m < bins; ++m) scale[m] = state.betas().weight(m) * static_cast<double>(bins);

  if (options.max_iterations == 0) {
    result.betas = state.betas();
    result.stop = StopReason::kNoIterations;
    return result;
  }

  auto bin_eps = [&](std::size_t m) {
    double e = 0.0;
    for (int a = 0; a < groups; ++a)
      if (state.counter(a, m) > 0) e = std::max(e, cell_eps[static_cast<std::size_t>(a) * bins + m]);
    return e;
  };

  result.stop = StopReason::kMaxIterations;
  for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
    std::size_t degenerate = 0;
    auto grads = approx_gradients(state, &degenerate);
    result.degenerate_slope_cells = std::max(result.degenerate_slope_cells, degenerate);

    std::vector<double> up_room(bins), down_room(bins), eps(bins);
    for (std::size_t m = 0; m < bins; ++m) {
      double b = state.betas()[m];
      up_room[m] = scale[m] * std::min(rank_step[m], 1.0 - b);
      down_room[m] = scale[m] * std::min(rank_step[m], b);
      eps[m] = options.epsilon ? *options.epsilon : bin_eps(m);
    }

    // (gain, ascent bin, descent bin), best first.
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t p = 0; p < bins; ++p) {
      if (up_room[p] < options.step_floor) continue;
      for (std::size_t q = 0; q < bins; ++q) {
        if (q == p || down_room[q] < options.step_floor) continue;
        double gain = grads[q].minus / scale[q] - grads[p].plus / scale[p];
        pairs.emplace_back(gain, p, q);
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      return std::tie(std::get<1>(x), std::get<2>(x)) < std::tie(std::get<1>(y), std::get<2>(y));
    });

    auto threshold = [&](std::size_t p, std::size_t q) { return 2.0 * std::max(eps[p], eps[q]); };
    if (pairs.empty() || !(std::get<0>(pairs.front()) > threshold(std::get<1>(pairs.front()), std::get<2>(pairs.front())))) {
      result.stop = StopReason::kConverged;
      break;
    }

    bool accepted = false;
    std::size_t tried = 0;
    const double before = state.objective().bound;
    for (const auto& [gain, p, q] : pairs) {
      if (tried >= std::max<std::size_t>(options.max_candidate_pairs, 1)) break;
      if (!(gain > threshold(p, q))) continue;
      ++tried;
      const double bp = state.betas()[p], bq = state.betas()[q];
      const double step = std::min(up_room[p], down_room[q]);
      state.set_betas(p, bp + step / scale[p], q, bq - step / scale[q]);
      check_chain(state.objective());
      if (state.objective().bound <= before) {
        accepted = true;
        break;
      }
      ++result.rejected_steps;
      state.set_betas(p, bp, q, bq);
    }
    if (!accepted) {
      result.stop = StopReason::kNoImprovingStep;
      break;
    }
    result.iterations = iter;
    result.trace.push_back({iter, state.objective()});
  }
  if (result.degenerate_slope_cells > 0)
    spdlog::warn("{} calibration cells have fewer than 2 scores; their slopes were set to 0",
                 result.degenerate_slope_cells);
  result.betas = state.betas();
  return result;
}

}  // namespace bfqr
