#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bfqr/interval.hpp"

namespace bfqr {

struct FitOptions {
  double learning_rate = 0.05;
  std::size_t iterations = 2000;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
};

struct QuantileLevels {
  double lower = 0.05;
  double upper = 0.95;
};

double pinball_loss(double prediction, double y, double tau);

struct Standardization {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  double label_center = 0.0;
  double label_scale = 1.0;
};

// Two affine quantile heads trained on standardized features and labels.
// Head weights live in the standardized space, intercept first.
class QuantileModel {
 public:
  QuantileModel() = default;
  // Weights in raw feature units (identity standardization).
  QuantileModel(std::vector<double> lower_weights, std::vector<double> upper_weights,
                QuantileLevels levels);
  QuantileModel(std::vector<double> lower_weights, std::vector<double> upper_weights,
                QuantileLevels levels, Standardization standardization);

  // features is row-major rows x cols.
  static QuantileModel fit(std::span<const double> features, std::size_t cols,
                           std::span<const double> labels, QuantileLevels levels,
                           const FitOptions& options = {});

  Interval predict_interval(std::span<const double> x) const;
  double predict_lower(std::span<const double> x) const;
  double predict_upper(std::span<const double> x) const;

  std::size_t feature_count() const { return lower_.empty() ? 0 : lower_.size() - 1; }
  // Weights expressed in raw feature units, intercept first.
  std::vector<double> lower_weights() const { return to_raw(lower_); }
  std::vector<double> upper_weights() const { return to_raw(upper_); }
  const Standardization& standardization() const { return scaling_; }
  QuantileLevels levels() const { return levels_; }
  std::size_t iterations() const { return iterations_; }
  double final_loss_lower() const { return final_loss_lower_; }
  double final_loss_upper() const { return final_loss_upper_; }

  std::string serialize() const;
  static QuantileModel deserialize(std::string_view text);
  void save(const std::string& path) const;
  static QuantileModel load(const std::string& path);

 private:
  double evaluate(const std::vector<double>& w, std::span<const double> x) const;
  std::vector<double> to_raw(const std::vector<double>& w) const;

  std::vector<double> lower_;
  std::vector<double> upper_;
  QuantileLevels levels_;
  Standardization scaling_;
  std::size_t iterations_ = 0;
  double final_loss_lower_ = 0.0;
  double final_loss_upper_ = 0.0;
};

}  // namespace bfqr
