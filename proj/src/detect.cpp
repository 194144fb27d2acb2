#include "balltrack/detect.hpp"

#include <cmath>
#include <limits>

namespace balltrack {

ColorImage::ColorImage(int width, int height)
    : ColorImage(width, height,
                 std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                     std::max(height, 0) * 3, 0.0)) {}

ColorImage::ColorImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw std::invalid_argument("image data size does not match width x height x 3");
  }
}

void ColorImage::set(int row, int col, double r, double g, double b) {
  at(row, col, 0) = r;
  at(row, col, 1) = g;
  at(row, col, 2) = b;
}

ProbabilityImage::ProbabilityImage(int width, int height, double fill)
    : ProbabilityImage(width, height,
                       std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                           std::max(height, 0), fill)) {}

ProbabilityImage::ProbabilityImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("probability data size does not match width x height");
  }
}

void DetectorConfig::validate() const {
  if (!(t_low > 0.0 && t_low <= t_high && t_high <= 1.0)) {
    throw std::invalid_argument("thresholds must satisfy 0 < t_low <= t_high <= 1");
  }
  if (connectivity != 4 && connectivity != 8) {
    throw std::invalid_argument("connectivity must be 4 or 8");
  }
}

double logit(const ConvUnit& unit, const ColorImage& image, int row, int col) {
  double z = unit.bias;
  for (int dy = -kFilterRadius; dy <= kFilterRadius; ++dy) {
    const int r = row + dy;
    if (r < 0 || r >= image.height()) continue;
    for (int dx = -kFilterRadius; dx <= kFilterRadius; ++dx) {
      const int c = col + dx;
      if (c < 0 || c >= image.width()) continue;
      const int base = ConvUnit::index(dy, dx, 0);
      z += unit.weights[base] * image.at(r, c, 0) +
           unit.weights[base + 1] * image.at(r, c, 1) +
           unit.weights[base + 2] * image.at(r, c, 2);
    }
  }
  return z;
}

ProbabilityImage infer(const ColorImage& image, const ConvUnit& unit) {
  if (image.width() < kFilterSize || image.height() < kFilterSize) {
    throw std::invalid_argument("image is smaller than the 5x5 filter");
  }
  ProbabilityImage out(image.width(), image.height());
  for (int row = 0; row < image.height(); ++row) {
    for (int col = 0; col < image.width(); ++col) {
      out.at(row, col) = 1.0 / (1.0 + std::exp(-logit(unit, image, row, col)));
    }
  }
  return out;
}

std::optional<PixelRegion> find_object_pixels(const ProbabilityImage& prob,
                                              const DetectorConfig& cfg,
                                              RegionStats* stats) {
  cfg.validate();
  const int width = prob.width();
  const int height = prob.height();
  if (width <= 0 || height <= 0) throw std::invalid_argument("empty probability image");

  const auto values = prob.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  if (stats) stats->argmax_visits += static_cast<long long>(values.size());
  if (values[best] < cfg.t_high) return std::nullopt;

  static constexpr int kOffsets8[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                          {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  static constexpr int kOffsets4[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  const auto* offsets = cfg.connectivity == 8 ? kOffsets8 : kOffsets4;
  const int neighbor_count = cfg.connectivity;

  PixelRegion region;
  std::vector<char> in_region(values.size(), 0);
  const int seed_row = static_cast<int>(best / width);
  const int seed_col = static_cast<int>(best % width);
  in_region[best] = 1;
  region.pixels.emplace_back(seed_row, seed_col);

  // region.pixels doubles as the BFS queue.
  for (std::size_t head = 0; head < region.pixels.size(); ++head) {
    const auto [row, col] = region.pixels[head];
    if (stats) ++stats->bfs_pops;
    for (int k = 0; k < neighbor_count; ++k) {
      const int r = row + offsets[k][0];
      const int c = col + offsets[k][1];
      if (r < 0 || r >= height || c < 0 || c >= width) continue;
      if (stats) ++stats->neighbor_checks;
      const std::size_t idx = static_cast<std::size_t>(r) * width + c;
      if (!in_region[idx] && values[idx] > cfg.t_low) {
        in_region[idx] = 1;
        region.pixels.emplace_back(r, c);
      }
    }
  }

  double sum_row = 0.0;
  double sum_col = 0.0;
  region.bbox = {seed_row, seed_col, seed_row, seed_col};
  for (const auto& [row, col] : region.pixels) {
    sum_row += row;
    sum_col += col;
    region.bbox.min_row = std::min(region.bbox.min_row, row);
    region.bbox.min_col = std::min(region.bbox.min_col, col);
    region.bbox.max_row = std::max(region.bbox.max_row, row);
    region.bbox.max_col = std::max(region.bbox.max_col, col);
  }
  const double count = static_cast<double>(region.pixels.size());
  region.centroid = {sum_col / count, sum_row / count};
  return region;
}

std::optional<Pixel> detect(const ColorImage& image, const ConvUnit& unit,
                            const DetectorConfig& cfg) {
  const auto region = find_object_pixels(infer(image, unit), cfg);
  if (!region) return std::nullopt;
  return region->centroid;
}

}  // namespace balltrack
