#include "bfqr/quantile_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "bfqr/errors.hpp"

namespace bfqr {

double pinball_loss(double prediction, double y, double tau) {
  if (y >= prediction) return tau * (y - prediction);
  return (1.0 - tau) * (prediction - y);
}

namespace {

void check_levels(QuantileLevels levels) {
  if (!(levels.lower > 0.0 && levels.lower < 1.0 && levels.upper > 0.0 && levels.upper < 1.0))
    throw ConfigError("quantile levels must lie in (0,1)");
  if (!(levels.lower < levels.upper)) throw ConfigError("quantile levels must be strictly ordered");
}

Standardization identity(std::size_t p) {
  Standardization s;
  s.feature_mean.assign(p, 0.0);
  s.feature_scale.assign(p, 1.0);
  return s;
}

// Subgradient of the pinball loss with respect to the prediction; 0 at a tie.
double pinball_slope(double prediction, double y, double tau) {
  if (y > prediction) return -tau;
  if (y < prediction) return 1.0 - tau;
  return 0.0;
}

}  // namespace

QuantileModel::QuantileModel(std::vector<double> lower_weights, std::vector<double> upper_weights,
                             QuantileLevels levels)
    : QuantileModel(lower_weights, upper_weights, levels,
                    identity(lower_weights.empty() ? 0 : lower_weights.size() - 1)) {}

QuantileModel::QuantileModel(std::vector<double> lower_weights, std::vector<double> upper_weights,
                             QuantileLevels levels, Standardization standardization)
    : lower_(std::move(lower_weights)),
      upper_(std::move(upper_weights)),
      levels_(levels),
      scaling_(std::move(standardization)) {
  check_levels(levels_);
  if (lower_.empty() || lower_.size() != upper_.size())
    throw ShapeError("quantile heads must have equal, non-zero length");
  const std::size_t p = lower_.size() - 1;
  if (scaling_.feature_mean.size() != p || scaling_.feature_scale.size() != p)
    throw ShapeError("standardization constants do not match weight length");
  for (double w : lower_)
    if (!std::isfinite(w)) throw ConfigError("non-finite model weight");
  for (double w : upper_)
    if (!std::isfinite(w)) throw ConfigError("non-finite model weight");
}

QuantileModel QuantileModel::fit(std::span<const double> features, std::size_t cols,
                                 std::span<const double> labels, QuantileLevels levels,
                                 const FitOptions& options) {
  check_levels(levels);
  const std::size_t n = labels.size();
  if (n == 0) throw EmptyInputError("cannot fit a quantile model on zero rows");
  if (features.size() != n * cols) throw ShapeError("feature matrix does not match label count");
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");

  Standardization sc;
  sc.feature_mean.assign(cols, 0.0);
  sc.feature_scale.assign(cols, 1.0);
  for (std::size_t j = 0; j < cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += features[i * cols + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = features[i * cols + j] - mean;
      var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(n));
    sc.feature_mean[j] = mean;
    sc.feature_scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  {
    double mean = 0.0;
    for (double y : labels) mean += y;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double y : labels) var += (y - mean) * (y - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    sc.label_center = mean;
    sc.label_scale = sd > 1e-12 ? sd : 1.0;
  }

  const std::size_t dim = cols + 1;
  std::vector<double> z(n * dim);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i * dim] = 1.0;
    for (std::size_t j = 0; j < cols; ++j)
      z[i * dim + 1 + j] = (features[i * cols + j] - sc.feature_mean[j]) / sc.feature_scale[j];
    t[i] = (labels[i] - sc.label_center) / sc.label_scale;
  }

  std::vector<double> w_lo(dim, 0.0), w_hi(dim, 0.0);
  std::vector<double> avg_lo(dim, 0.0), avg_hi(dim, 0.0);
  std::vector<double> g_lo(dim), g_hi(dim);
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t batch = options.batch_size;
  const std::size_t tail_start = options.iterations / 2;
  std::size_t averaged = 0;

  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::fill(g_lo.begin(), g_lo.end(), 0.0);
    std::fill(g_hi.begin(), g_hi.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t i = pick(rng);
      const double* zi = &z[i * dim];
      double p_lo = 0.0, p_hi = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        p_lo += w_lo[j] * zi[j];
        p_hi += w_hi[j] * zi[j];
      }
      double s_lo = pinball_slope(p_lo, t[i], levels.lower);
      double s_hi = pinball_slope(p_hi, t[i], levels.upper);
      for (std::size_t j = 0; j < dim; ++j) {
        g_lo[j] += s_lo * zi[j];
        g_hi[j] += s_hi * zi[j];
      }
    }
    const double step = options.learning_rate / static_cast<double>(batch);
    for (std::size_t j = 0; j < dim; ++j) {
      w_lo[j] -= step * g_lo[j];
      w_hi[j] -= step * g_hi[j];
      if (!std::isfinite(w_lo[j]) || !std::isfinite(w_hi[j]))
        throw DivergenceError("quantile model diverged; try a smaller learning rate");
    }
    if (it >= tail_start) {
      ++averaged;
      double k = 1.0 / static_cast<double>(averaged);
      for (std::size_t j = 0; j < dim; ++j) {
        avg_lo[j] += (w_lo[j] - avg_lo[j]) * k;
        avg_hi[j] += (w_hi[j] - avg_hi[j]) * k;
      }
    }
  }
  if (averaged == 0) {
    avg_lo = w_lo;
    avg_hi = w_hi;
  }

  QuantileModel model(avg_lo, avg_hi, levels, sc);
  model.iterations_ = options.iterations;
  double loss_lo = 0.0, loss_hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto x = features.subspan(i * cols, cols);
    loss_lo += pinball_loss(model.predict_lower(x), labels[i], levels.lower);
    loss_hi += pinball_loss(model.predict_upper(x), labels[i], levels.upper);
  }
  model.final_loss_lower_ = loss_lo / static_cast<double>(n);
  model.final_loss_upper_ = loss_hi / static_cast<double>(n);
  if (!std::isfinite(model.final_loss_lower_) || !std::isfinite(model.final_loss_upper_))
    throw DivergenceError("non-finite training loss; try a smaller learning rate");
  return model;
}

double QuantileModel::evaluate(const std::vector<double>& w, std::span<const double> x) const {
  if (x.size() + 1 != w.size())
    throw ShapeError("feature vector has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(w.size() - 1));
  double s = w[0];
  for (std::size_t j = 0; j < x.size(); ++j)
    s += w[j + 1] * (x[j] - scaling_.feature_mean[j]) / scaling_.feature_scale[j];
  return scaling_.label_center + scaling_.label_scale * s;
}

double QuantileModel::predict_lower(std::span<const double> x) const { return evaluate(lower_, x); }
double QuantileModel::predict_upper(std::span<const double> x) const { return evaluate(upper_, x); }

Interval QuantileModel::predict_interval(std::span<const double> x) const {
  double lo = predict_lower(x);
  double hi = predict_upper(x);
  return {std::min(lo, hi), std::max(lo, hi)};
}

std::vector<double> QuantileModel::to_raw(const std::vector<double>& w) const {
  std::vector<double> raw(w.size());
  double intercept = w[0];
  for (std::size_t j = 1; j < w.size(); ++j) {
    double slope = w[j] / scaling_.feature_scale[j - 1];
    raw[j] = scaling_.label_scale * slope;
    intercept -= slope * scaling_.feature_mean[j - 1];
  }
  raw[0] = scaling_.label_center + scaling_.label_scale * intercept;
  return raw;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error("model file: bad number '" + tok + "' for key " + key);
    }
  }
  return out;
}

}  // namespace

std::string QuantileModel::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << "format=bfqr-quantile-model/1\n"
     << "level_lower=" << levels_.lower << '\n'
     << "level_upper=" << levels_.upper << '\n'
     << "features=" << feature_count() << '\n'
     << "feature_mean=" << join(scaling_.feature_mean) << '\n'
     << "feature_scale=" << join(scaling_.feature_scale) << '\n'
     << "label_center=" << scaling_.label_center << '\n'
     << "label_scale=" << scaling_.label_scale << '\n'
     << "lower_weights=" << join(lower_) << '\n'
     << "upper_weights=" << join(upper_) << '\n'
     << "iterations=" << iterations_ << '\n'
     << "final_loss_lower=" << final_loss_lower_ << '\n'
     << "final_loss_upper=" << final_loss_upper_ << '\n';
  return os.str();
}

QuantileModel QuantileModel::deserialize(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("model file: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error("model file: missing key " + key);
    return it->second;
  };
  if (get("format") != "bfqr-quantile-model/1") throw Error("model file: unsupported format");
  auto scalar = [&](const std::string& key) {
    auto v = parse_list(key, get(key));
    if (v.size() != 1) throw Error("model file: key " + key + " expects one value");
    return v[0];
  };
  QuantileLevels levels{scalar("level_lower"), scalar("level_upper")};
  Standardization sc;
  sc.feature_mean = parse_list("feature_mean", get("feature_mean"));
  sc.feature_scale = parse_list("feature_scale", get("feature_scale"));
  sc.label_center = scalar("label_center");
  sc.label_scale = scalar("label_scale");
  QuantileModel m(parse_list("lower_weights", get("lower_weights")),
                  parse_list("upper_weights", get("upper_weights")), levels, sc);
  if (m.feature_count() != static_cast<std::size_t>(scalar("features")))
    throw ShapeError("model file: feature count mismatch");
  m.iterations_ = static_cast<std::size_t>(scalar("iterations"));
  m.final_loss_lower_ = scalar("final_loss_lower");
  m.final_loss_upper_ = scalar("final_loss_upper");
  return m;
}

void QuantileModel::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError(path, "cannot open for writing");
  f << serialize();
  if (!f) throw IoError(path, "write failed");
}

QuantileModel QuantileModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path, "cannot open for reading");
  std::ostringstream buf;
  buf << f.rdbuf();
  return deserialize(buf.str());
}

}  // namespace bfqr
