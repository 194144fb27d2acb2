#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "balltrack/geometry.hpp"

namespace balltrack {

/// Row-major RGB image, channels in [0, 1].
class ColorImage {
 public:
  ColorImage() = default;
  ColorImage(int width, int height);
  ColorImage(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  double& at(int row, int col, int channel) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  void set(int row, int col, double r, double g, double b);
  std::span<const double> data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel ball probability, row-major.
class ProbabilityImage {
 public:
  ProbabilityImage() = default;
  ProbabilityImage(int width, int height, double fill = 0.0);
  ProbabilityImage(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }
  double& at(int row, int col) {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::span<const double> values() const { return values_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct DetectorConfig {
  double t_high = 0.8;
  double t_low = 0.3;
  int connectivity = 8;  // 4 or 8

  void validate() const;
};

inline constexpr int kFilterSize = 5;
inline constexpr int kFilterRadius = kFilterSize / 2;
inline constexpr int kFilterWeights = kFilterSize * kFilterSize * 3;

/// A single 5x5x3 convolutional unit followed by a logistic sigmoid.
/// Weights are row-major over the window with the channel varying fastest.
struct ConvUnit {
  std::array<double, kFilterWeights> weights{};
  double bias = 0.0;

  static constexpr int index(int dy, int dx, int channel) {
    return ((dy + kFilterRadius) * kFilterSize + (dx + kFilterRadius)) * 3 + channel;
  }
};

struct BBox {
  int min_row = 0;
  int min_col = 0;
  int max_row = 0;
  int max_col = 0;

  bool contains(int row, int col) const {
    return row >= min_row && row <= max_row && col >= min_col && col <= max_col;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct PixelRegion {
  std::vector<std::pair<int, int>> pixels;  // (row, col) in visit order
  Pixel centroid;                           // u = column, v = row
  BBox bbox;
};

/// Work counters for find_object_pixels.
struct RegionStats {
  long long argmax_visits = 0;
  long long bfs_pops = 0;
  long long neighbor_checks = 0;
};

/// Same-size zero-padded correlation with the unit, then sigmoid.
ProbabilityImage infer(const ColorImage& image, const ConvUnit& unit);

/// Global argmax gate followed by a breadth-first flood fill over pixels
/// above the low threshold. Returns nullopt when max < t_high.
std::optional<PixelRegion> find_object_pixels(const ProbabilityImage& prob,
                                              const DetectorConfig& cfg,
                                              RegionStats* stats = nullptr);

/// infer + find_object_pixels; reports the region centroid.
std::optional<Pixel> detect(const ColorImage& image, const ConvUnit& unit,
                            const DetectorConfig& cfg);

// ---------------------------------------------------------------------------
// Training

class TrainError : public std::runtime_error {
 public:
  enum class Kind { kNoPositives, kDiverged };
  TrainError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LabeledImage {
  ColorImage image;
  std::optional<BBox> bbox;
};

struct TrainParams {
  double learning_rate = 0.05;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct TrainingSample {
  const ColorImage* image = nullptr;
  int row = 0;
  int col = 0;
  double label = 0.0;
};

struct TrainReport {
  ConvUnit unit;
  std::vector<double> epoch_loss;  // mean cross-entropy after each epoch
  double initial_loss = 0.0;
};

/// Seed-determined starting point for training.
ConvUnit initial_unit(std::uint64_t seed);

/// All bbox pixels as positives plus 10 negatives per positive, per image.
std::vector<TrainingSample> build_training_samples(std::span<const LabeledImage> data,
                                                   std::uint64_t seed);

double logit(const ConvUnit& unit, const ColorImage& image, int row, int col);

double mean_cross_entropy(const ConvUnit& unit, std::span<const TrainingSample> samples);

/// Gradient of mean_cross_entropy: 75 weights followed by the bias.
std::array<double, kFilterWeights + 1> cross_entropy_gradient(
    const ConvUnit& unit, std::span<const TrainingSample> samples);

TrainReport train_with_report(std::span<const LabeledImage> data, const TrainParams& params);

ConvUnit train(std::span<const LabeledImage> data, const TrainParams& params);

// ---------------------------------------------------------------------------
// Files

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ColorImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ColorImage& image);
ProbabilityImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const ProbabilityImage& prob);

/// {"weights": [75 numbers], "bias": number}
ConvUnit load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const ConvUnit& unit);

struct LabelRecord {
  std::filesystem::path image;
  std::optional<BBox> bbox;
};

/// One record per line: `path [min_row min_col max_row max_col]`. Blank lines
/// and lines starting with '#' are ignored. Relative image paths resolve
/// against the label file's directory.
std::vector<LabelRecord> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, std::span<const LabelRecord> records);

}  // namespace balltrack
