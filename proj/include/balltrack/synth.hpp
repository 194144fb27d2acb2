#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "balltrack/detect.hpp"
#include "balltrack/geometry.hpp"

namespace balltrack {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

inline constexpr Rgb kBallColor{1.0, 0.55, 0.1};

/// Flat gray background with up to three non-ball colored rectangles.
ColorImage render_background(int width, int height, std::mt19937_64& rng);

/// Alpha-blends a disk using 4x4 supersampled coverage. Pixel (row, col) has
/// its center at (u, v) = (col, row).
void draw_disk(ColorImage& image, const Pixel& center, double radius, const Rgb& color);

/// Pixels whose centers lie inside the disk, clipped to the image. nullopt if
/// none are inside.
std::optional<BBox> disk_bbox(const Pixel& center, double radius, int width, int height);

struct CorpusConfig {
  int count = 200;
  int width = 96;
  int height = 72;
  double ball_fraction = 0.5;
  double min_radius = 2.5;
  double max_radius = 6.0;
  std::uint64_t seed = 1;
};

struct CorpusItem {
  LabeledImage labeled;
  std::optional<Pixel> center;
  double radius = 0.0;
};

/// Balls lie fully inside the frame.
std::vector<CorpusItem> generate_disk_corpus(const CorpusConfig& cfg);

/// Writes images/NNNN.ppm plus a label file; returns the label file path.
std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<CorpusItem>& corpus,
                                   const std::string& label_name = "labels.txt");

// ---------------------------------------------------------------------------
// Multi-camera scenes

struct SceneConfig {
  int cameras = 4;
  int frames = 500;
  ImageSize image{320, 240};
  Box workspace{Point3(-0.5, -0.4, 0.0), Point3(0.5, 0.4, 0.6)};
  double ball_radius = 0.02;  // m
  int corrupt_camera = 0;     // -1 disables corruption
  double corrupt_rate = 0.1;
  std::uint64_t seed = 7;
};

struct SceneFrame {
  long long frame = 0;
  Point3 position;
  bool corrupted = false;
};

struct Scene {
  SceneConfig config;
  std::vector<CameraModel> rig;
  std::vector<SceneFrame> frames;
};

Scene make_scene(const SceneConfig& cfg);

/// Projected ball radius in px for a sphere at X.
double projected_radius(const Point3& X, double radius, const CameraModel& cam);

/// On a corrupted frame of the corrupt camera the ball is hidden and a
/// ball-colored distractor is drawn far from the true projection.
ColorImage render_view(const Scene& scene, std::size_t frame_index, std::size_t camera_index);

/// Writes calib.json, manifest.txt, truth.csv and images/cam<id>/<frame>.ppm.
void write_scene(const std::filesystem::path& dir, const Scene& scene);

}  // namespace balltrack
