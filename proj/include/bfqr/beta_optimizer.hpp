#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bfqr/bfqr_core.hpp"
#include "bfqr/conformal.hpp"
#include "bfqr/dataset.hpp"

namespace bfqr {

// A point whose interval width enters the objective.
struct OptimizationPoint {
  Interval raw;
  int group = 0;
  // Width of the interval the bound starts from, and the margin folded
  // into it; bound_i = start_width + G(m-) + G(m+) - 2 * margin.
  double start_width = 0.0;
  double margin = 0.0;
};

struct Objective {
  double width = 0.0;       // mean union width
  double hull_width = 0.0;  // mean hull width
  double bound = 0.0;       // mean dummy width bound
};

struct TraceEntry {
  std::size_t iteration = 0;
  Objective objective;
};

struct Slopes {
  double plus = 0.0;
  double minus = 0.0;
  bool degenerate = false;  // cell too small to estimate
};

struct BinGradient {
  double plus = 0.0;
  double minus = 0.0;
};

// Shift-and-clip projection so the weighted mean equals target.
BetaVector project_to_mean(const BetaVector& betas, double target);

// Bin weights proportional to member counts.
std::vector<double> bin_mass_weights(const BinPartition& partition);

BetaVector init_betas(std::span<const ConformityRecord> records, const BinPartition& partition, double alpha,
                      bool weighted_bins = false);

Slopes estimate_slopes(const GroupBinQuantiles& gbq, int a, std::size_t m, double beta, double delta);

// Per-point sub-interval cache plus the counters u_{a,m}.
class OptimizerState {
 public:
  OptimizerState(const GroupBinQuantiles& gbq, const BinPartition& partition, std::vector<OptimizationPoint> points,
                 BetaVector betas);

  const BetaVector& betas() const { return betas_; }
  const Objective& objective() const { return objective_; }
  std::size_t point_count() const { return points_.size(); }
  std::size_t bin_count() const { return bins_; }
  int group_count() const { return groups_; }
  std::size_t counter(int a, std::size_t m) const { return counters_[static_cast<std::size_t>(a) * bins_ + m]; }
  const GroupBinQuantiles& quantiles() const { return *gbq_; }

  // Per-point values for the current betas.
  double point_width(std::size_t i) const { return width_[i]; }
  double point_hull_width(std::size_t i) const { return hull_[i]; }
  double point_bound(std::size_t i) const { return bound_[i]; }

  void set_beta(std::size_t m, double value);
  void set_betas(std::size_t p, double vp, std::size_t q, double vq);

 private:
  void refresh_bin(std::size_t m);
  void refresh_point(std::size_t i, std::size_t m1, std::size_t m2);
  void add_contribution(std::size_t i, int sign);
  void recompute_objective();

  const GroupBinQuantiles* gbq_;
  const BinPartition* partition_;
  std::vector<OptimizationPoint> points_;
  BetaVector betas_;
  std::size_t bins_;
  int groups_;
  std::vector<Interval> bin_extent_;
  std::vector<double> g_;  // current G_{a,m}, group-major
  // Per point and bin: sub-interval, or lower > upper when empty.
  std::vector<Interval> sub_;
  std::vector<std::size_t> first_;  // m- per point, bins_ when empty
  std::vector<std::size_t> last_;   // m+ per point
  std::vector<double> width_, hull_, bound_;
  std::vector<std::size_t> counters_;
  Objective objective_;
};

std::vector<BinGradient> approx_gradients(const OptimizerState& state, std::size_t* degenerate_cells = nullptr);

// Cell-level slope error used for the stopping rule when no epsilon is given.
double default_cell_epsilon(const std::vector<double>& sorted_scores);

double dummy_width_bound(const BetaVector& betas, const GroupBinQuantiles& gbq, const BinPartition& partition,
                         std::span<const OptimizationPoint> points);
Objective evaluate_objective(const BetaVector& betas, const GroupBinQuantiles& gbq, const BinPartition& partition,
                             std::span<const OptimizationPoint> points);

struct OptimizerOptions {
  std::size_t max_iterations = 200;
  std::optional<double> epsilon;
  double step_floor = 1e-6;
  // Pairs tried per iteration before giving up when steps raise the bound.
  std::size_t max_candidate_pairs = 8;
};

enum class StopReason { kNoIterations, kConverged, kNoImprovingStep, kMaxIterations };
const char* to_string(StopReason r);

struct OptimizerResult {
  BetaVector betas;
  std::vector<TraceEntry> trace;  // initial state plus every accepted step
  std::size_t iterations = 0;
  StopReason stop = StopReason::kNoIterations;
  std::size_t evaluations = 0;
  std::size_t rejected_steps = 0;
  // Evaluations where width <= hull <= bound failed.
  std::size_t chain_violations = 0;
  std::size_t degenerate_slope_cells = 0;
};

OptimizerResult optimize(OptimizerState& state, double alpha, const OptimizerOptions& options = {});

}  // namespace bfqr
