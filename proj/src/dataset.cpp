#include "bfqr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bfqr/errors.hpp"

namespace bfqr {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.rows = indices.size();
  out.cols = cols;
  out.group_count = group_count;
  out.features.reserve(indices.size() * cols);
  out.labels.reserve(indices.size());
  out.groups.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= rows) throw ShapeError("subset index out of range");
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    out.groups.push_back(groups[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (features.size() != rows * cols || labels.size() != rows || groups.size() != rows)
    throw ShapeError("dataset columns have inconsistent lengths");
  for (int g : groups)
    if (g < 0 || g >= group_count) throw ConfigError("group id outside [0, group_count)");
  for (double v : features)
    if (!std::isfinite(v)) throw ConfigError("non-finite feature value");
  for (double v : labels)
    if (!std::isfinite(v)) throw ConfigError("non-finite label value");
}

SeededDrawSource::SeededDrawSource(std::uint64_t seed, GeneratorOptions options)
    : rng_(seed), options_(options) {}

double SeededDrawSource::noise() {
  if (options_.noise == NoiseKind::kUniform)
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  return std::normal_distribution<double>(0.0, 1.0)(rng_);
}

SyntheticDraw SeededDrawSource::next() {
  SyntheticDraw d;
  std::exponential_distribution<double> expo(1.0);
  for (auto& v : d.x) v = expo(rng_);
  d.e1 = noise();
  d.e2 = noise();
  d.e3 = noise();
  if (options_.abs_scale) d.e3 = std::abs(d.e3);
  d.selector = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  return d;
}

int synthetic_group(double selector) {
  if (selector < 0.1) return 0;
  if (selector < 0.3) return 1;
  return 2;
}

double synthetic_label(int group, double feature_sum, double e1, double e2, double e3) {
  if (group == 1) return 10.0 * e2;
  return (group + feature_sum + 10.0 * e1) * e3;
}

Dataset generate_synthetic(std::size_t n, DrawSource& source) {
  Dataset out;
  out.rows = n;
  out.cols = kSyntheticFeatures;
  out.group_count = kSyntheticGroups;
  out.features.reserve(n * kSyntheticFeatures);
  out.labels.reserve(n);
  out.groups.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticDraw d = source.next();
    int a = synthetic_group(d.selector);
    double sum = 0.0;
    for (double v : d.x) sum += v;
    out.features.insert(out.features.end(), d.x.begin(), d.x.end());
    out.labels.push_back(synthetic_label(a, sum, d.e1, d.e2, d.e3));
    out.groups.push_back(a);
  }
  return out;
}

Dataset generate_synthetic(std::size_t n, std::uint64_t seed, const GeneratorOptions& options) {
  SeededDrawSource source(seed, options);
  return generate_synthetic(n, source);
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError(name);
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw EmptyInputError("CSV input is empty");
  auto header = split_fields(line);

  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column_index(header, f));
  std::size_t label_col = column_index(header, schema.label);
  std::size_t group_col = column_index(header, schema.group);

  Dataset out;
  out.cols = feature_cols.size();
  std::size_t row = 0;
  int max_group = -1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto fields = split_fields(line);
    auto cell = [&](std::size_t col, const std::string& name) -> const std::string& {
      if (col >= fields.size()) throw ParseError(row, name, "");
      return fields[col];
    };
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const auto& c = cell(feature_cols[j], schema.features[j]);
      double v;
      if (!parse_double(c, v)) throw ParseError(row, schema.features[j], c);
      out.features.push_back(v);
    }
    {
      const auto& c = cell(label_col, schema.label);
      double v;
      if (!parse_double(c, v)) throw ParseError(row, schema.label, c);
      out.labels.push_back(v);
    }
    {
      const auto& c = cell(group_col, schema.group);
      double v;
      if (!parse_double(c, v) || v < 0 || v != std::floor(v) || v > 1e6)
        throw ParseError(row, schema.group, c);
      int g = static_cast<int>(v);
      out.groups.push_back(g);
      max_group = std::max(max_group, g);
    }
  }
  out.rows = row;
  out.group_count = max_group + 1;
  return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str(), schema);
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError(path, "cannot open for writing");
  for (std::size_t j = 0; j < data.cols; ++j) f << 'x' << (j + 1) << ',';
  f << "y,a\n";
  f.precision(17);
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (double v : data.row(i)) f << v << ',';
    f << data.labels[i] << ',' << data.groups[i] << '\n';
  }
  if (!f) throw IoError(path, "write failed");
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  std::array<double, 3> r{ratios.train, ratios.calibration, ratios.test};
  double total = 0.0;
  for (double v : r) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("split ratios must be finite and non-negative");
    total += v;
  }
  if (total <= 0.0) throw ConfigError("split ratios are all zero");
  std::array<std::size_t, 3> sizes{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    sizes[k] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r[k] / total));
    used += sizes[k];
  }
  // Floating error can leave the floor one above the exact value.
  while (used > n) {
    for (int k = 2; k >= 0 && used > n; --k)
      if (sizes[k] > 0) --sizes[k], --used;
  }
  for (int k = 0; used < n; k = (k + 1) % 3) {
    if (r[k] > 0.0) ++sizes[k], ++used;
  }
  return sizes;
}

SplitIndices split(const Dataset& data, const SplitRatios& ratios, std::uint64_t seed) {
  if (data.empty()) throw EmptyInputError("cannot split an empty dataset");
  auto sizes = split_sizes(data.size(), ratios);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  SplitIndices out;
  auto it = perm.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.calibration.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, it + sizes[2]);
  return out;
}

std::size_t BinPartition::bin_of(double y) const {
  const std::size_t m = bin_count();
  // First interior boundary strictly greater than y.
  auto first = boundaries.begin() + 1;
  auto last = boundaries.end() - 1;
  auto it = std::upper_bound(first, last, y);
  std::size_t idx = static_cast<std::size_t>(it - first);
  return std::min(idx, m - 1);
}

BinPartition make_equal_mass_bins(std::span<const double> labels, std::size_t bins) {
  const std::size_t n = labels.size();
  if (bins == 0) throw ConfigError("bin count must be at least 1");
  if (bins > n) throw ConfigError("bin count exceeds sample count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  BinPartition p;
  p.boundaries.resize(bins + 1);
  p.members.resize(bins);
  p.assignment.resize(n);
  p.boundaries[0] = labels[order.front()];
  p.boundaries[bins] = labels[order.back()];
  for (std::size_t m = 0; m < bins; ++m) {
    std::size_t lo = m * n / bins;
    std::size_t hi = (m + 1) * n / bins;
    for (std::size_t k = lo; k < hi; ++k) {
      p.members[m].push_back(order[k]);
      p.assignment[order[k]] = m;
    }
    if (m + 1 < bins) p.boundaries[m + 1] = 0.5 * (labels[order[hi - 1]] + labels[order[hi]]);
  }
  for (auto& mem : p.members) std::sort(mem.begin(), mem.end());
  return p;
}

}  // namespace bfqr
