#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "bfqr/dataset.hpp"
#include "bfqr/errors.hpp"

using namespace bfqr;

namespace {

class FixedDraws : public DrawSource {
 public:
  explicit FixedDraws(SyntheticDraw d) : d_(d) {}
  SyntheticDraw next() override { return d_; }

 private:
  SyntheticDraw d_;
};

std::string temp_file(const std::string& name, const std::string& content) {
  auto p = std::filesystem::temp_directory_path() / ("bfqr_test_" + name);
  std::ofstream(p) << content;
  return p.string();
}

}  // namespace

TEST_CASE("generator group frequencies match 0.1/0.2/0.7") {
  auto d = generate_synthetic(100000, 0);
  std::array<double, 3> count{};
  for (int g : d.groups) count[static_cast<std::size_t>(g)] += 1;
  const double n = 100000.0;
  CHECK(std::abs(count[0] / n - 0.1) <= 0.01);
  const std::array<double, 3> p{0.1, 0.2, 0.7};
  for (std::size_t a = 0; a < 3; ++a) {
    double se = std::sqrt(p[a] * (1 - p[a]) / n);
    CHECK(std::abs(count[a] / n - p[a]) <= 3 * se);
  }
  CHECK(d.group_count == 3);
  CHECK(d.cols == 10);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("generator: empty and deterministic") {
  auto e = generate_synthetic(0, 5);
  CHECK(e.rows == 0);
  CHECK(e.group_count == 3);
  auto a = generate_synthetic(500, 42);
  auto b = generate_synthetic(500, 42);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.groups == b.groups);
  auto c = generate_synthetic(500, 43);
  CHECK(a.labels != c.labels);
}

TEST_CASE("generator features are Exp(1)") {
  auto d = generate_synthetic(20000, 3);
  double mean = 0;
  for (double v : d.features) {
    CHECK(v >= 0);
    mean += v;
  }
  mean /= static_cast<double>(d.features.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("injected noise gives Y = feature sum") {
  SyntheticDraw draw;
  for (std::size_t j = 0; j < kSyntheticFeatures; ++j) draw.x[j] = 0.5 * static_cast<double>(j + 1);
  draw.e1 = 0.0;
  draw.e3 = 1.0;
  draw.selector = 0.05;
  FixedDraws src(draw);
  auto d = generate_synthetic(1, src);
  double sum = 0;
  for (double v : draw.x) sum += v;
  CHECK(d.groups[0] == 0);
  CHECK(d.labels[0] == doctest::Approx(sum));

  CHECK(synthetic_label(2, 3.0, 0.0, 0.0, 1.0) == doctest::Approx(5.0));
  CHECK(synthetic_label(1, 3.0, 0.0, 0.7, 1.0) == doctest::Approx(7.0));
  CHECK(synthetic_group(0.0999) == 0);
  CHECK(synthetic_group(0.1) == 1);
  CHECK(synthetic_group(0.2999) == 1);
  CHECK(synthetic_group(0.3) == 2);
}

TEST_CASE("generator options") {
  GeneratorOptions abs;
  abs.abs_scale = true;
  auto d = generate_synthetic(2000, 1, abs);
  auto plain = generate_synthetic(2000, 1);
  CHECK(d.groups == plain.groups);
  for (std::size_t i = 0; i < d.rows; ++i)
    CHECK(std::abs(d.labels[i]) == doctest::Approx(std::abs(plain.labels[i])));
  GeneratorOptions uni;
  uni.noise = NoiseKind::kUniform;
  auto u = generate_synthetic(2000, 1, uni);
  for (std::size_t i = 0; i < u.rows; ++i) {
    if (u.groups[i] == 1) {
      CHECK(u.labels[i] >= 0.0);
      CHECK(u.labels[i] <= 10.0);
    } else {
      CHECK(u.labels[i] >= 0.0);
    }
  }
}

TEST_CASE("csv loading") {
  auto path = temp_file("ok.csv", "x1,x2,y,a\n1,2,3,0\n4,5,6,1\n7,8,9,2\n");
  auto d = load_csv(path, {{"x1", "x2"}, "y", "a"});
  CHECK(d.rows == 3);
  CHECK(d.cols == 2);
  CHECK(d.group_count == 3);
  CHECK(d.row(1)[1] == 5.0);
  CHECK(d.labels == std::vector<double>{3, 6, 9});

  SUBCASE("missing column") {
    try {
      load_csv(path, {{"x1", "salary"}, "y", "a"});
      FAIL("expected schema error");
    } catch (const SchemaError& e) {
      CHECK(e.column() == "salary");
    }
  }
  SUBCASE("parse error position") {
    auto bad = temp_file("bad.csv", "x1,y,a\n1,2,0\n1,abc,0\n");
    try {
      load_csv(bad, {{"x1"}, "y", "a"});
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 2);
      CHECK(e.column() == "y");
    }
  }
  SUBCASE("empty file") {
    auto empty = temp_file("empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty, {{"x1"}, "y", "a"}), EmptyInputError);
  }
  SUBCASE("negative or fractional group") {
    CHECK_THROWS_AS(parse_csv("x,y,a\n1,2,-1\n", {{"x"}, "y", "a"}), ParseError);
    CHECK_THROWS_AS(parse_csv("x,y,a\n1,2,0.5\n", {{"x"}, "y", "a"}), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_csv("/nonexistent/x.csv", {{}, "y", "a"}), IoError); }
}

TEST_CASE("csv round trip through write_csv") {
  auto d = generate_synthetic(50, 9);
  auto p = (std::filesystem::temp_directory_path() / "bfqr_test_rt.csv").string();
  write_csv(d, p);
  auto back = load_csv(p, {{"x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10"}, "y", "a"});
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);
  CHECK(back.groups == d.groups);
}

TEST_CASE("split sizes and properties") {
  auto d = generate_synthetic(5000, 0);
  auto s = split(d, {}, 7);
  CHECK(s.train.size() == 3000);
  CHECK(s.calibration.size() == 1000);
  CHECK(s.test.size() == 1000);
  std::vector<std::size_t> all;
  all.insert(all.end(), s.train.begin(), s.train.end());
  all.insert(all.end(), s.calibration.begin(), s.calibration.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

  auto again = split(d, {}, 7);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split(d, {}, 8).train != s.train);

  auto tiny = generate_synthetic(5, 0);
  auto t = split(tiny, {}, 1);
  CHECK(t.train.size() == 3);
  CHECK(t.calibration.size() == 1);
  CHECK(t.test.size() == 1);

  CHECK_THROWS_AS(split(d, {0, 0, 0}, 1), ConfigError);
  CHECK_THROWS_AS(split(generate_synthetic(0, 0), {}, 1), EmptyInputError);
}

TEST_CASE("split remainder goes to train, then calibration, then test") {
  // Enumerate small n and compare with the hand rule.
  for (std::size_t n = 1; n <= 40; ++n) {
    auto sz = split_sizes(n, {});
    std::size_t base[3] = {n * 3 / 5, n / 5, n / 5};
    std::size_t rem = n - base[0] - base[1] - base[2];
    for (std::size_t k = 0; k < rem; ++k) ++base[k];
    CHECK(sz[0] == base[0]);
    CHECK(sz[1] == base[1]);
    CHECK(sz[2] == base[2]);
  }
}

TEST_CASE("equal-mass bins") {
  std::vector<double> y{1, 2, 3, 4, 5, 6};
  auto p = make_equal_mass_bins(y, 3);
  REQUIRE(p.bin_count() == 3);
  for (const auto& m : p.members) CHECK(m.size() == 2);
  CHECK(p.boundaries[0] == 1.0);
  CHECK(p.boundaries[1] == 2.5);
  CHECK(p.boundaries[2] == 4.5);
  CHECK(p.boundaries[3] == 6.0);

  auto one = make_equal_mass_bins(y, 1);
  CHECK(one.bin_count() == 1);
  CHECK(one.members[0].size() == 6);
  CHECK(one.boundaries == std::vector<double>{1.0, 6.0});

  CHECK_THROWS_AS(make_equal_mass_bins(y, 7), ConfigError);
  CHECK_THROWS_AS(make_equal_mass_bins(y, 0), ConfigError);
}

TEST_CASE("equal-mass bins on 1000 uniform draws") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> y(1000);
  for (auto& v : y) v = u(rng);
  auto p = make_equal_mass_bins(y, 20);
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t m = 0; m < 20; ++m) {
    CHECK(p.members[m].size() == 50);
    // Members are exactly the sorted block.
    for (std::size_t i : p.members[m]) {
      CHECK(y[i] >= sorted[m * 50]);
      CHECK(y[i] <= sorted[m * 50 + 49]);
      CHECK(p.bin_of(y[i]) == m);
    }
  }
}

TEST_CASE("equal-mass property over random inputs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 300;
    std::size_t m = 1 + rng() % n;
    std::vector<double> y(n);
    // Heavy ties on purpose.
    for (auto& v : y) v = static_cast<double>(rng() % 7);
    auto p = make_equal_mass_bins(y, m);
    std::size_t lo = n, hi = 0, total = 0;
    std::vector<int> seen(n, 0);
    for (std::size_t b = 0; b < m; ++b) {
      lo = std::min(lo, p.members[b].size());
      hi = std::max(hi, p.members[b].size());
      total += p.members[b].size();
      for (std::size_t i : p.members[b]) {
        ++seen[i];
        CHECK(p.assignment[i] == b);
      }
    }
    CHECK(hi - lo <= 1);
    CHECK(total == n);
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(p.boundaries.front() <= *std::min_element(y.begin(), y.end()));
    CHECK(p.boundaries.back() >= *std::max_element(y.begin(), y.end()));
    CHECK(std::is_sorted(p.boundaries.begin(), p.boundaries.end()));
  }
}

TEST_CASE("bin_of conventions") {
  BinPartition p;
  p.boundaries = {1, 2.5, 4.5, 6};
  p.members.resize(3);
  CHECK(p.bin_of(3) == 1);
  CHECK(p.bin_of(2.5) == 1);
  CHECK(p.bin_of(1) == 0);
  CHECK(p.bin_of(-5) == 0);
  CHECK(p.bin_of(6) == 2);
  CHECK(p.bin_of(100) == 2);
}

TEST_CASE("dataset subset and validation") {
  auto d = generate_synthetic(10, 2);
  std::vector<std::size_t> idx{3, 7};
  auto s = d.subset(idx);
  CHECK(s.rows == 2);
  CHECK(s.labels[1] == d.labels[7]);
  CHECK(std::equal(s.row(0).begin(), s.row(0).end(), d.row(3).begin()));
  Dataset bad = d;
  bad.groups[0] = 9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = d;
  bad.labels.pop_back();
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}
