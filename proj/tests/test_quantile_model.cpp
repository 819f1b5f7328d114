#include <doctest.h>

#include <cmath>
#include <random>

#include "bfqr/errors.hpp"
#include "bfqr/quantile_model.hpp"

using namespace bfqr;

TEST_CASE("pinball loss values") {
  CHECK(pinball_loss(3.0, 3.0, 0.9) == 0.0);
  CHECK(pinball_loss(1.0, 0.0, 0.9) == doctest::Approx(0.1));
  CHECK(pinball_loss(0.0, 1.0, 0.9) == doctest::Approx(0.9));
}

TEST_CASE("pinball loss subgradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5), t(0.01, 0.99);
  for (int k = 0; k < 100; ++k) {
    double pred = u(rng), y = u(rng), tau = t(rng);
    if (std::abs(pred - y) < 1e-3) continue;
    double h = 1e-6;
    double num = (pinball_loss(pred + h, y, tau) - pinball_loss(pred - h, y, tau)) / (2 * h);
    double analytic = y > pred ? -tau : 1.0 - tau;
    CHECK(num == doctest::Approx(analytic).epsilon(1e-6));
    // Convexity along the prediction.
    double mid = pinball_loss(pred, y, tau);
    CHECK(mid <= 0.5 * (pinball_loss(pred - 0.3, y, tau) + pinball_loss(pred + 0.3, y, tau)) + 1e-12);
  }
}

TEST_CASE("constant labels are predicted exactly") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> x(500 * 3), y(500, 4.25);
  for (auto& v : x) v = n(rng);
  auto m = QuantileModel::fit(x, 3, y, {0.05, 0.95}, {});
  for (int k = 0; k < 20; ++k) {
    std::vector<double> probe{n(rng) * 3, n(rng), n(rng)};
    auto iv = m.predict_interval(probe);
    CHECK(std::abs(iv.lower - 4.25) < 1e-3);
    CHECK(std::abs(iv.upper - 4.25) < 1e-3);
  }
}

TEST_CASE("noiseless line recovers slope 2") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 5);
  std::vector<double> x(2000), y(2000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = 2.0 * x[i];
  }
  auto m = QuantileModel::fit(x, 1, y, {0.5, 0.6}, {});
  CHECK(std::abs(m.lower_weights()[1] - 2.0) < 0.05);
  auto iv = m.predict_interval(std::vector<double>{3.0});
  CHECK(std::abs(iv.lower - 6.0) < 0.2);
  CHECK(std::abs(iv.upper - 6.0) < 0.2);
}

TEST_CASE("uniform noise upper quantile") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1), ux(0, 4);
  const std::size_t n = 10000;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = ux(rng);
    y[i] = x[i] + u(rng);
  }
  auto m = QuantileModel::fit(x, 1, y, {0.1, 0.9}, {});
  double err = 0;
  for (std::size_t i = 0; i < n; ++i) err += std::abs(m.predict_upper(std::span(&x[i], 1)) - (x[i] + 0.9));
  CHECK(err / n < 0.05);
}

TEST_CASE("held-out calibration of the fitted heads") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0, 1);
  std::exponential_distribution<double> ex(1);
  auto draw = [&](std::size_t n, std::vector<double>& x, std::vector<double>& y) {
    x.resize(n * 2);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[2 * i] = ex(rng);
      x[2 * i + 1] = nd(rng);
      y[i] = 3 * x[2 * i] - x[2 * i + 1] + 2 * nd(rng);
    }
  };
  std::vector<double> xt, yt, xh, yh;
  draw(20000, xt, yt);
  draw(20000, xh, yh);
  auto m = QuantileModel::fit(xt, 2, yt, {0.05, 0.95}, {});
  double below_lo = 0, below_hi = 0;
  for (std::size_t i = 0; i < yh.size(); ++i) {
    auto iv = m.predict_interval(std::span(&xh[2 * i], 2));
    below_lo += yh[i] < iv.lower;
    below_hi += yh[i] < iv.upper;
  }
  CHECK(std::abs(below_lo / yh.size() - 0.05) <= 0.03);
  CHECK(std::abs(below_hi / yh.size() - 0.95) <= 0.03);
}

TEST_CASE("prediction rules") {
  QuantileModel m({1.0, 0.0}, {5.0, 0.0}, {0.05, 0.95});
  auto iv = m.predict_interval(std::vector<double>{123.0});
  CHECK(iv.lower == 1.0);
  CHECK(iv.upper == 5.0);
  QuantileModel crossing({5.0, 0.0}, {1.0, 0.0}, {0.05, 0.95});
  auto c = crossing.predict_interval(std::vector<double>{0.0});
  CHECK(c.lower == 1.0);
  CHECK(c.upper == 5.0);
  CHECK_THROWS_AS(m.predict_interval(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("predict_interval never crosses") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0, 3);
  for (int k = 0; k < 50; ++k) {
    QuantileModel m({nd(rng), nd(rng), nd(rng)}, {nd(rng), nd(rng), nd(rng)}, {0.1, 0.9});
    for (int j = 0; j < 20; ++j) {
      auto iv = m.predict_interval(std::vector<double>{nd(rng), nd(rng)});
      CHECK(iv.lower <= iv.upper);
    }
  }
}

TEST_CASE("fit errors and determinism") {
  std::vector<double> x{1, 2, 3}, y{1, 2, 3};
  CHECK_THROWS_AS(QuantileModel::fit(x, 1, y, {0.9, 0.1}, {}), ConfigError);
  CHECK_THROWS_AS(QuantileModel::fit(x, 1, y, {0.0, 0.5}, {}), ConfigError);
  CHECK_THROWS_AS(QuantileModel::fit({}, 1, {}, {0.1, 0.9}, {}), EmptyInputError);
  std::vector<double> yb{1, std::nan(""), 3};
  CHECK_THROWS_AS(QuantileModel::fit(x, 1, yb, {0.1, 0.9}, {}), DivergenceError);

  auto a = QuantileModel::fit(x, 1, y, {0.1, 0.9}, {0.05, 300, 4, 9});
  auto b = QuantileModel::fit(x, 1, y, {0.1, 0.9}, {0.05, 300, 4, 9});
  CHECK(a.serialize() == b.serialize());
  CHECK(a.iterations() == 300);
  CHECK(std::isfinite(a.final_loss_lower()));
}

TEST_CASE("serialization round trip") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(0, 1);
  std::vector<double> x(600), y(200);
  for (auto& v : x) v = nd(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[3 * i] - 2 * x[3 * i + 2] + nd(rng);
  auto m = QuantileModel::fit(x, 3, y, {0.05, 0.95}, {});
  auto text = m.serialize();
  auto back = QuantileModel::deserialize(text);
  CHECK(back.serialize() == text);
  std::vector<double> probe{0.3, -1.2, 2.0};
  CHECK(back.predict_interval(probe) == m.predict_interval(probe));
  CHECK_THROWS(QuantileModel::deserialize("format=other\n"));
  CHECK_THROWS(QuantileModel::deserialize("format=bfqr-quantile-model/1\nlevel_lower=0.1\n"));
}
