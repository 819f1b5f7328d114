#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace oracle {

double rank_select(std::vector<double> scores, long long num, long long den) {
  const long long n = static_cast<long long>(scores.size());
  long long k = (num + den - 1) / den;
  if (k < 1) k = 1;
  if (k > n) k = n;
  std::sort(scores.begin(), scores.end());
  return scores[static_cast<std::size_t>(k - 1)];
}

double u_statistic(std::span<const int> groups, std::span<const int> covered) {
  const std::size_t n = groups.size();
  if (n > 14) throw std::length_error("u_statistic oracle limited to 14 points");
  if (n < 4) throw std::invalid_argument("u_statistic oracle needs 4 points");
  std::set<int> as(groups.begin(), groups.end());
  std::set<int> vs(covered.begin(), covered.end());
  auto phi = [&](std::size_t i, std::size_t j, int a, int v) {
    double joint = (groups[i] == a && covered[i] == v) ? 1.0 : 0.0;
    double prod = (groups[i] == a ? 1.0 : 0.0) * (covered[j] == v ? 1.0 : 0.0);
    return joint - prod;
  };
  double total = 0.0;
  std::size_t subsets = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) {
          std::array<std::size_t, 4> idx{i, j, k, l};
          std::array<int, 4> perm{0, 1, 2, 3};
          double h = 0.0;
          do {
            for (int a : as)
              for (int v : vs)
                h += phi(idx[perm[0]], idx[perm[1]], a, v) * phi(idx[perm[2]], idx[perm[3]], a, v);
          } while (std::next_permutation(perm.begin(), perm.end()));
          total += h / 24.0;
          ++subsets;
        }
  return total / static_cast<double>(subsets);
}

double l2_dependence(const std::vector<std::vector<double>>& joint) {
  std::vector<double> pa(joint.size(), 0.0), pv(joint.empty() ? 0 : joint[0].size(), 0.0);
  for (std::size_t a = 0; a < joint.size(); ++a)
    for (std::size_t v = 0; v < joint[a].size(); ++v) {
      pa[a] += joint[a][v];
      pv[v] += joint[a][v];
    }
  double s = 0.0;
  for (std::size_t a = 0; a < joint.size(); ++a)
    for (std::size_t v = 0; v < joint[a].size(); ++v) {
      double d = joint[a][v] - pa[a] * pv[v];
      s += d * d;
    }
  return s;
}

double v_statistic_matrix(std::span<const int> groups, std::span<const int> covered) {
  const std::size_t n = groups.size();
  std::vector<std::vector<double>> ma(n, std::vector<double>(n)), mv(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      ma[i][j] = groups[i] != groups[j] ? 1.0 : 0.0;
      mv[i][j] = covered[i] != covered[j] ? 1.0 : 0.0;
    }
  std::vector<double> row(n, 0.0), col(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row[i] += mv[i][j];
      col[j] += mv[i][j];
      grand += mv[i][j];
    }
  const double s = static_cast<double>(n);
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      t1 += ma[i][j] * mv[i][j];
      t2 += ma[i][j] * (grand - 2.0 * row[i] - 2.0 * col[j] + 2.0 * mv[i][j]);
      t3 += ma[i][j] * (row[i] - mv[i][j]);
    }
  return (t1 + t2 / ((s - 2.0) * (s - 3.0)) - 2.0 / (s - 2.0) * t3) / (s * (s - 1.0));
}

double mean_max_gap(std::vector<GapRecord> records, std::size_t bins) {
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return records[x].label < records[y].label; });
  double total = 0.0;
  for (std::size_t m = 0; m < bins; ++m) {
    std::size_t lo = m * n / bins, hi = (m + 1) * n / bins;
    std::map<int, std::pair<int, int>> cell;
    for (std::size_t k = lo; k < hi; ++k) {
      const auto& r = records[order[k]];
      cell[r.group].first += r.covered;
      cell[r.group].second += 1;
    }
    double best = 0.0;
    for (const auto& [g1, c1] : cell)
      for (const auto& [g2, c2] : cell)
        best = std::max(best, double(c1.first) / c1.second - double(c2.first) / c2.second);
    total += best;
  }
  return total / static_cast<double>(bins);
}

}  // namespace oracle
