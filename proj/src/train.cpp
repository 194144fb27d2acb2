#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "balltrack/detect.hpp"

namespace balltrack {

namespace {

constexpr int kNegativesPerPositive = 10;

// Loss growth beyond this factor of the starting loss counts as divergence.
constexpr double kDivergenceFactor = 10.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable -[y log s(z) + (1 - y) log(1 - s(z))].
double cross_entropy(double z, double label) {
  return std::max(z, 0.0) - label * z + std::log1p(std::exp(-std::abs(z)));
}

void accumulate_gradient(const ConvUnit& unit, const TrainingSample& s, double scale,
                         std::array<double, kFilterWeights + 1>& grad) {
  const ColorImage& image = *s.image;
  const double err = (sigmoid(logit(unit, image, s.row, s.col)) - s.label) * scale;
  for (int dy = -kFilterRadius; dy <= kFilterRadius; ++dy) {
    const int r = s.row + dy;
    if (r < 0 || r >= image.height()) continue;
    for (int dx = -kFilterRadius; dx <= kFilterRadius; ++dx) {
      const int c = s.col + dx;
      if (c < 0 || c >= image.width()) continue;
      const int base = ConvUnit::index(dy, dx, 0);
      for (int ch = 0; ch < 3; ++ch) grad[base + ch] += err * image.at(r, c, ch);
    }
  }
  grad[kFilterWeights] += err;
}

BBox clipped(const BBox& box, const ColorImage& image) {
  return {std::max(box.min_row, 0), std::max(box.min_col, 0),
          std::min(box.max_row, image.height() - 1), std::min(box.max_col, image.width() - 1)};
}

long long area(const BBox& b) {
  if (b.max_row < b.min_row || b.max_col < b.min_col) return 0;
  return static_cast<long long>(b.max_row - b.min_row + 1) * (b.max_col - b.min_col + 1);
}

void sample_negatives(const ColorImage& image, const std::optional<BBox>& box,
                      long long wanted, std::mt19937_64& rng,
                      std::vector<TrainingSample>& out) {
  const long long total = static_cast<long long>(image.width()) * image.height();
  const long long outside = total - (box ? area(*box) : 0);
  wanted = std::min(wanted, outside);
  std::vector<char> taken(static_cast<std::size_t>(total), 0);
  std::uniform_int_distribution<long long> pick(0, total - 1);
  long long drawn = 0;
  while (drawn < wanted) {
    const long long idx = pick(rng);
    const int row = static_cast<int>(idx / image.width());
    const int col = static_cast<int>(idx % image.width());
    if (taken[idx] || (box && box->contains(row, col))) continue;
    taken[idx] = 1;
    out.push_back({&image, row, col, 0.0});
    ++drawn;
  }
}

}  // namespace

ConvUnit initial_unit(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  ConvUnit unit;
  for (double& w : unit.weights) w = normal(rng);
  unit.bias = 0.0;
  return unit;
}

std::vector<TrainingSample> build_training_samples(std::span<const LabeledImage> data,
                                                   std::uint64_t seed) {
  long long positive_total = 0;
  long long labeled_images = 0;
  for (const LabeledImage& item : data) {
    if (!item.bbox) continue;
    const long long n = area(clipped(*item.bbox, item.image));
    if (n > 0) {
      positive_total += n;
      ++labeled_images;
    }
  }
  if (positive_total == 0) {
    throw TrainError(TrainError::Kind::kNoPositives, "corpus has no positive bounding boxes");
  }
  // Images without a ball get the negative budget of an average labeled one.
  const long long empty_budget = static_cast<long long>(std::llround(
      kNegativesPerPositive * static_cast<double>(positive_total) / labeled_images));

  std::mt19937_64 rng(seed ^ 0x5deece66dULL);
  std::vector<TrainingSample> samples;
  for (const LabeledImage& item : data) {
    std::optional<BBox> box;
    if (item.bbox) box = clipped(*item.bbox, item.image);
    long long positives = 0;
    if (box && area(*box) > 0) {
      for (int row = box->min_row; row <= box->max_row; ++row) {
        for (int col = box->min_col; col <= box->max_col; ++col) {
          samples.push_back({&item.image, row, col, 1.0});
        }
      }
      positives = area(*box);
    } else {
      box.reset();
    }
    const long long wanted = box ? kNegativesPerPositive * positives : empty_budget;
    sample_negatives(item.image, box, wanted, rng, samples);
  }
  return samples;
}

double mean_cross_entropy(const ConvUnit& unit, std::span<const TrainingSample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const TrainingSample& s : samples) {
    sum += cross_entropy(logit(unit, *s.image, s.row, s.col), s.label);
  }
  return sum / static_cast<double>(samples.size());
}

std::array<double, kFilterWeights + 1> cross_entropy_gradient(
    const ConvUnit& unit, std::span<const TrainingSample> samples) {
  std::array<double, kFilterWeights + 1> grad{};
  if (samples.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(samples.size());
  for (const TrainingSample& s : samples) accumulate_gradient(unit, s, scale, grad);
  return grad;
}

TrainReport train_with_report(std::span<const LabeledImage> data, const TrainParams& params) {
  if (params.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (params.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (!(params.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");

  const std::vector<TrainingSample> samples = build_training_samples(data, params.seed);
  TrainReport report;
  report.unit = initial_unit(params.seed);
  report.initial_loss = mean_cross_entropy(report.unit, samples);

  std::mt19937_64 rng(params.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingSample> batch;
  batch.reserve(static_cast<std::size_t>(params.batch_size));

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t stop = std::min(order.size(), start + params.batch_size);
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(samples[order[k]]);
      const auto grad = cross_entropy_gradient(report.unit, batch);
      for (int w = 0; w < kFilterWeights; ++w) {
        report.unit.weights[w] -= params.learning_rate * grad[w];
      }
      report.unit.bias -= params.learning_rate * grad[kFilterWeights];
    }
    const double loss = mean_cross_entropy(report.unit, samples);
    report.epoch_loss.push_back(loss);
    if (!std::isfinite(loss) || loss > kDivergenceFactor * report.initial_loss) {
      throw TrainError(TrainError::Kind::kDiverged,
                       "training diverged at epoch " + std::to_string(epoch + 1) +
                           " (loss " + std::to_string(loss) + ")");
    }
  }
  return report;
}

ConvUnit train(std::span<const LabeledImage> data, const TrainParams& params) {
  return train_with_report(data, params).unit;
}

}  // namespace balltrack
