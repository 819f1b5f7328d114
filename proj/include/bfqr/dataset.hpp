#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bfqr {

// Row-major feature matrix with labels and protected-group ids.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<double> labels;
  std::vector<int> groups;
  int group_count = 0;

  std::size_t size() const { return rows; }
  bool empty() const { return rows == 0; }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * cols, cols};
  }
  Dataset subset(std::span<const std::size_t> indices) const;
  // Throws ShapeError / ConfigError when an invariant is broken.
  void validate() const;
};

inline constexpr std::size_t kSyntheticFeatures = 10;
inline constexpr int kSyntheticGroups = 3;

enum class NoiseKind { kNormal, kUniform };

struct GeneratorOptions {
  // Distribution of eps1..eps3.
  NoiseKind noise = NoiseKind::kNormal;
  // Replace the multiplicative eps3 by |eps3|.
  bool abs_scale = false;
};

struct SyntheticDraw {
  std::array<double, kSyntheticFeatures> x{};
  double e1 = 0.0;
  double e2 = 0.0;
  double e3 = 1.0;
  double selector = 0.0;  // uniform on [0,1), picks the group
};

class DrawSource {
 public:
  virtual ~DrawSource() = default;
  virtual SyntheticDraw next() = 0;
};

class SeededDrawSource : public DrawSource {
 public:
  SeededDrawSource(std::uint64_t seed, GeneratorOptions options);
  SyntheticDraw next() override;

 private:
  double noise();

  std::mt19937_64 rng_;
  GeneratorOptions options_;
};

int synthetic_group(double selector);
double synthetic_label(int group, double feature_sum, double e1, double e2, double e3);

Dataset generate_synthetic(std::size_t n, std::uint64_t seed, const GeneratorOptions& options = {});
Dataset generate_synthetic(std::size_t n, DrawSource& source);

struct CsvSchema {
  std::vector<std::string> features;
  std::string label;
  std::string group;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_csv(const std::string& text, const CsvSchema& schema);
void write_csv(const Dataset& data, const std::string& path);

struct SplitRatios {
  double train = 3.0;
  double calibration = 1.0;
  double test = 1.0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> test;
};

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);
SplitIndices split(const Dataset& data, const SplitRatios& ratios, std::uint64_t seed);

// Bin indices are 0-based. Bin m covers [boundaries[m], boundaries[m+1]),
// the last bin is right-closed.
struct BinPartition {
  std::vector<double> boundaries;
  std::vector<std::vector<std::size_t>> members;
  // Bin of each input position, consistent with members (label ties are
  // split by input order, so this can differ from bin_of at a tied cut).
  std::vector<std::size_t> assignment;

  std::size_t bin_count() const { return members.size(); }
  double lower(std::size_t m) const { return boundaries[m]; }
  double upper(std::size_t m) const { return boundaries[m + 1]; }
  std::size_t bin_of(double y) const;
};

BinPartition make_equal_mass_bins(std::span<const double> labels, std::size_t bins);

}  // namespace bfqr
