#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <tuple>
#include <limits>
#include <random>

#include "bfqr/bfqr_core.hpp"
#include "bfqr/conformal.hpp"
#include "bfqr/dataset.hpp"
#include "bfqr/errors.hpp"

using namespace bfqr;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

BinPartition two_unit_bins() {
  BinPartition p;
  p.boundaries = {0.0, 1.0, 2.0};
  p.members = {{0}, {1}};
  p.assignment = {0, 1};
  return p;
}

std::vector<ConformityRecord> random_records(std::size_t n, int groups, std::size_t bins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> s(0, 1);
  std::uniform_int_distribution<int> g(0, groups - 1);
  std::uniform_int_distribution<std::size_t> b(0, bins - 1);
  std::vector<ConformityRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({s(rng), g(rng), b(rng), i});
  return out;
}

}  // namespace

TEST_CASE("cell bucketing") {
  std::vector<ConformityRecord> recs;
  for (int a = 0; a < 2; ++a)
    for (std::size_t m = 0; m < 3; ++m) recs.push_back({static_cast<double>(a + m), a, m, recs.size()});
  GroupBinQuantiles gbq(recs, 2, 3);
  for (int a = 0; a < 2; ++a)
    for (std::size_t m = 0; m < 3; ++m) CHECK(gbq.count(a, m) == 1);
  CHECK(gbq.fallback_cells() == 0);

  for (auto& r : recs) r.group = 0;
  GroupBinQuantiles only0(recs, 2, 3);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(only0.count(1, m) == 0);
    CHECK(only0.uses_fallback(1, m));
  }
  // group 1 never occurs, so its empty cells are not counted as fallbacks
  CHECK(only0.fallback_cells() == 0);
}

TEST_CASE("counts are conserved and cells sorted") {
  auto recs = random_records(20000, 3, 20, 5);
  GroupBinQuantiles gbq(recs, 3, 20);
  std::size_t total = 0;
  for (int a = 0; a < 3; ++a)
    for (std::size_t m = 0; m < 20; ++m) {
      total += gbq.count(a, m);
      const auto& c = gbq.cell(a, m);
      CHECK(std::is_sorted(c.begin(), c.end()));
    }
  CHECK(total == 20000);
  CHECK(gbq.total() == 20000);
}

TEST_CASE("lookup examples") {
  std::vector<ConformityRecord> recs = {{-1, 0, 0, 0}, {2, 0, 0, 1}, {0, 0, 0, 2}};
  GroupBinQuantiles clamp(recs, 1, 1, RankOverflow::kClamp);
  GroupBinQuantiles open(recs, 1, 1, RankOverflow::kUnbounded);
  CHECK(lookup_G(clamp, 0, 0, 0.5) == 0.0);
  CHECK(lookup_G(open, 0, 0, 0.5) == 0.0);
  CHECK(lookup_G(clamp, 0, 0, 1.0) == 2.0);
  CHECK(lookup_G(open, 0, 0, 1.0) == kInf);
  CHECK(lookup_G(open, 0, 0, 0.75) == 2.0);
  CHECK(lookup_G(open, 0, 0, 0.0) < -1.0);
  CHECK(open.lookup_clamped(0, 0, 1.0) == 2.0);

  std::vector<ConformityRecord> fb = {{3, 0, 4, 0}};
  GroupBinQuantiles gbq(fb, 2, 5);
  CHECK(gbq.uses_fallback(1, 4));
  CHECK(lookup_G(gbq, 1, 4, 0.5) == 3.0);
  // group 0 occurs, so its empty bins 0..3 count as fallbacks
  CHECK(gbq.fallback_cells() == 4);
}

TEST_CASE("lookup is non-decreasing in beta") {
  auto recs = random_records(300, 2, 3, 9);
  GroupBinQuantiles gbq(recs, 2, 3);
  for (int a = 0; a < 2; ++a)
    for (std::size_t m = 0; m < 3; ++m) {
      double prev = -kInf;
      for (int i = 0; i <= 200; ++i) {
        double g = gbq.lookup(a, m, i / 200.0);
        CHECK(g >= prev);
        prev = g;
      }
    }
}

TEST_CASE("beta vector") {
  auto b = BetaVector::constant(4, 0.9);
  CHECK(b.mean() == doctest::Approx(0.9));
  BetaVector w({1.0, 0.0}, {3.0, 1.0});
  CHECK(w.weight(0) == doctest::Approx(0.75));
  CHECK(w.mean() == doctest::Approx(0.75));
  CHECK_THROWS_AS(BetaVector({1.0}, {0.0}), ConfigError);
  CHECK_THROWS_AS(BetaVector({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("hand-built two-bin interval") {
  auto p = two_unit_bins();
  std::vector<ConformityRecord> recs = {{0.2, 0, 0, 0}, {0.1, 0, 1, 1}};
  GroupBinQuantiles gbq(recs, 1, 2);
  BetaVector betas({0.5, 0.5});
  auto u = bfqr_interval(Interval{0.5, 0.5}, 0, betas, gbq, p);
  REQUIRE(u.size() == 1);
  CHECK(u.intervals()[0].lower == doctest::Approx(0.3));
  CHECK(u.intervals()[0].upper == doctest::Approx(0.7));
  CHECK(u.total_width() == doctest::Approx(0.4));

  // grid membership: y in B_m and |y - 0.5| <= G_m
  for (int i = -100; i <= 300; ++i) {
    double y = i * 0.01 + 0.001;
    std::size_t m = y < 1.0 ? 0 : 1;
    double g = m == 0 ? 0.2 : 0.1;
    bool expect = std::abs(y - 0.5) <= g;
    CHECK(u.covers(y) == expect);
  }
}

TEST_CASE("sub-intervals respect right-open bins") {
  auto p = two_unit_bins();
  CHECK_FALSE(bin_sub_interval(p, 0, Interval{1.5, 1.5}, 0.5).has_value());
  auto last = bin_sub_interval(p, 1, Interval{0.0, 0.0}, 1.0);
  REQUIRE(last.has_value());
  CHECK(last->lower == 1.0);
  CHECK(last->upper == 1.0);
  CHECK(bin_extent(p, 0).lower == -kInf);
  CHECK(bin_extent(p, 1).upper == kInf);
}

TEST_CASE("saturation and vacuous sets") {
  auto p = two_unit_bins();
  std::vector<ConformityRecord> recs = {{10, 0, 0, 0}, {10, 0, 1, 1}};
  GroupBinQuantiles gbq(recs, 1, 2);
  auto all = bfqr_interval(Interval{0.5, 0.5}, 0, BetaVector({0.5, 0.5}), gbq, p);
  REQUIRE(all.size() == 1);
  CHECK(all.intervals()[0].lower <= 0.0);
  CHECK(all.intervals()[0].upper >= 2.0);

  std::vector<ConformityRecord> tight = {{0.0, 0, 0, 0}, {0.0, 0, 1, 1}};
  GroupBinQuantiles gt(tight, 1, 2);
  auto none = bfqr_interval(Interval{0.5, 0.5}, 0, BetaVector({0.0, 0.0}), gt, p);
  CHECK(none.empty());
  CHECK(none.total_width() == 0.0);

  CHECK_THROWS_AS(bfqr_interval(Interval{0, 1}, 0, BetaVector({0.5}), gt, p), ShapeError);
}

TEST_CASE("raising one beta never shrinks the union") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> labels;
  for (int i = 0; i < 400; ++i) labels.push_back(u(rng) * 10);
  auto part = make_equal_mass_bins(labels, 5);
  auto recs = random_records(400, 2, 5, 4);
  GroupBinQuantiles gbq(recs, 2, 5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> b(5);
    for (auto& v : b) v = u(rng);
    double c = u(rng) * 10;
    Interval raw{c - u(rng), c + u(rng)};
    int a = t % 2;
    double before = bfqr_interval(raw, a, BetaVector(b), gbq, part).total_width();
    std::size_t m = t % 5;
    b[m] = std::min(1.0, b[m] + u(rng) * 0.3);
    double after = bfqr_interval(raw, a, BetaVector(b), gbq, part).total_width();
    CHECK(after >= before - 1e-12);
    auto un = bfqr_interval(raw, a, BetaVector(b), gbq, part);
    CHECK(un.hull_width() >= un.total_width());
  }
}

TEST_CASE("single bin and group reduces to split CQR") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> s(0, 1);
  std::vector<double> scores, labels;
  std::vector<ConformityRecord> recs;
  for (std::size_t i = 0; i < 500; ++i) {
    scores.push_back(s(rng));
    labels.push_back(s(rng));
    recs.push_back({scores.back(), 0, 0, i});
  }
  auto part = make_equal_mass_bins(labels, 1);
  GroupBinQuantiles gbq(recs, 1, 1);
  SplitCqr cqr(scores, 0.1);
  for (int t = 0; t < 200; ++t) {
    double c = s(rng) * 3;
    Interval raw{c - 1, c + 1};
    CHECK(bfqr_interval(raw, 0, BetaVector({0.9}), gbq, part) == cqr.predict(raw));
  }
}

TEST_CASE("bin coverage sits between beta and beta plus one rank") {
  // Exchangeable scores and labels; the bin of a point is fixed by its label.
  const std::size_t bins = 3;
  std::vector<double> betas = {0.8, 0.9, 1.0};
  const int reps = 200;
  std::vector<double> mean(bins * 2, 0.0), sq(bins * 2, 0.0);
  std::vector<std::size_t> cells(bins * 2, 0);
  double marg = 0, marg_sq = 0;
  BinPartition part;
  part.boundaries = {0.0, 1.0, 2.0, 3.0};
  part.members.resize(bins);
  for (int r = 0; r < reps; ++r) {
    std::mt19937_64 rng(100 + r);
    std::uniform_real_distribution<double> lab(0, 3);
    std::normal_distribution<double> noise(0, 1);
    auto draw = [&](std::size_t n) {
      std::vector<std::tuple<double, int, double>> out;
      for (std::size_t i = 0; i < n; ++i) {
        double y = lab(rng);
        int a = noise(rng) > 0.5 ? 1 : 0;
        double q = y + noise(rng) * (1 + a);
        out.emplace_back(y, a, q);
      }
      return out;
    };
    auto cal = draw(900);
    std::vector<ConformityRecord> recs;
    for (std::size_t i = 0; i < cal.size(); ++i) {
      auto [y, a, q] = cal[i];
      recs.push_back({conformity_score(q, q, y), a, part.bin_of(y), i});
    }
    GroupBinQuantiles gbq(recs, 2, bins);
    std::vector<double> hit(bins * 2, 0.0), tot(bins * 2, 0.0);
    double covered = 0;
    for (auto [y, a, q] : draw(900)) {
      std::size_t m = part.bin_of(y);
      bool cov = bfqr_interval(Interval{q, q}, a, BetaVector(betas), gbq, part).covers(y);
      hit[a * bins + m] += cov;
      tot[a * bins + m] += 1;
      covered += cov;
    }
    covered /= 900;
    marg += covered;
    marg_sq += covered * covered;
    for (std::size_t c = 0; c < bins * 2; ++c) {
      double v = tot[c] > 0 ? hit[c] / tot[c] : 0.0;
      mean[c] += v;
      sq[c] += v * v;
      cells[c] += gbq.count(static_cast<int>(c / bins), c % bins);
    }
  }
  for (std::size_t c = 0; c < bins * 2; ++c) {
    double n = static_cast<double>(cells[c]) / reps;
    REQUIRE(n >= 50);
    double mu = mean[c] / reps;
    double se = std::sqrt(std::max(0.0, sq[c] / reps - mu * mu) / reps);
    double beta = betas[c % bins];
    CHECK(mu >= beta - 3 * se);
    CHECK(mu <= beta + 1.0 / (n + 1) + 3 * se);
  }
  // mean beta is 0.9, so marginal coverage reaches it too
  double mm = marg / reps;
  CHECK(mm >= 0.9 - 3 * std::sqrt((marg_sq / reps - mm * mm) / reps));
}
