#include "balltrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "balltrack/calibration.hpp"
#include "balltrack/sim.hpp"

namespace balltrack {

namespace {

constexpr double kPixelNoise = 0.02;

const Rgb kDistractorColors[] = {
    {0.15, 0.25, 0.75},  // blue
    {0.20, 0.60, 0.25},  // green
    {0.10, 0.10, 0.10},  // dark
    {0.90, 0.90, 0.90},  // white
    {0.85, 0.65, 0.55},  // skin
};

void add_pixel_noise(ColorImage& image, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, kPixelNoise);
  for (int row = 0; row < image.height(); ++row) {
    for (int col = 0; col < image.width(); ++col) {
      for (int ch = 0; ch < 3; ++ch) {
        double& v = image.at(row, col, ch);
        v = std::clamp(v + gauss(rng), 0.0, 1.0);
      }
    }
  }
}

std::filesystem::path frame_image_path(int camera_id, long long frame) {
  std::ostringstream name;
  name << std::setw(6) << std::setfill('0') << frame << ".ppm";
  return std::filesystem::path("images") / ("cam" + std::to_string(camera_id)) / name.str();
}

}  // namespace

ColorImage render_background(int width, int height, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ColorImage image(width, height);
  const double gray = 0.4 + 0.2 * unit(rng);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) image.set(row, col, gray, gray, gray);
  }
  const int rects = static_cast<int>(unit(rng) * 4.0);
  for (int k = 0; k < rects; ++k) {
    const Rgb& color = kDistractorColors[static_cast<int>(unit(rng) * 5.0) % 5];
    const int w = 4 + static_cast<int>(unit(rng) * width / 4.0);
    const int h = 4 + static_cast<int>(unit(rng) * height / 4.0);
    const int r0 = static_cast<int>(unit(rng) * (height - h));
    const int c0 = static_cast<int>(unit(rng) * (width - w));
    for (int row = std::max(r0, 0); row < std::min(r0 + h, height); ++row) {
      for (int col = std::max(c0, 0); col < std::min(c0 + w, width); ++col) {
        image.set(row, col, color.r, color.g, color.b);
      }
    }
  }
  return image;
}

void draw_disk(ColorImage& image, const Pixel& center, double radius, const Rgb& color) {
  constexpr int kSub = 4;
  const int r0 = std::max(0, static_cast<int>(std::floor(center.v - radius - 1)));
  const int r1 = std::min(image.height() - 1, static_cast<int>(std::ceil(center.v + radius + 1)));
  const int c0 = std::max(0, static_cast<int>(std::floor(center.u - radius - 1)));
  const int c1 = std::min(image.width() - 1, static_cast<int>(std::ceil(center.u + radius + 1)));
  const double r2 = radius * radius;
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      int inside = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double y = row - 0.5 + (sy + 0.5) / kSub - center.v;
          const double x = col - 0.5 + (sx + 0.5) / kSub - center.u;
          if (x * x + y * y <= r2) ++inside;
        }
      }
      if (inside == 0) continue;
      const double a = static_cast<double>(inside) / (kSub * kSub);
      image.at(row, col, 0) = (1 - a) * image.at(row, col, 0) + a * color.r;
      image.at(row, col, 1) = (1 - a) * image.at(row, col, 1) + a * color.g;
      image.at(row, col, 2) = (1 - a) * image.at(row, col, 2) + a * color.b;
    }
  }
}

std::optional<BBox> disk_bbox(const Pixel& center, double radius, int width, int height) {
  std::optional<BBox> box;
  const int r0 = std::max(0, static_cast<int>(std::ceil(center.v - radius)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(center.v + radius)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(center.u - radius)));
  const int c1 = std::min(width - 1, static_cast<int>(std::floor(center.u + radius)));
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      const double du = col - center.u;
      const double dv = row - center.v;
      if (du * du + dv * dv > radius * radius) continue;
      if (!box) {
        box = BBox{row, col, row, col};
      } else {
        box->min_row = std::min(box->min_row, row);
        box->min_col = std::min(box->min_col, col);
        box->max_row = std::max(box->max_row, row);
        box->max_col = std::max(box->max_col, col);
      }
    }
  }
  return box;
}

std::vector<CorpusItem> generate_disk_corpus(const CorpusConfig& cfg) {
  if (cfg.count < 0) throw std::invalid_argument("corpus size must be non-negative");
  if (cfg.width < 2 * cfg.max_radius + 4 || cfg.height < 2 * cfg.max_radius + 4) {
    throw std::invalid_argument("images too small for the requested ball radius");
  }
  std::vector<CorpusItem> corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i), 0xc0ffee));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    CorpusItem item;
    ColorImage image = render_background(cfg.width, cfg.height, rng);
    if (unit(rng) < cfg.ball_fraction) {
      const double radius = cfg.min_radius + (cfg.max_radius - cfg.min_radius) * unit(rng);
      const double margin = radius + 1.0;
      const Pixel center{margin + unit(rng) * (cfg.width - 1 - 2 * margin),
                         margin + unit(rng) * (cfg.height - 1 - 2 * margin)};
      draw_disk(image, center, radius, kBallColor);
      item.center = center;
      item.radius = radius;
      item.labeled.bbox = disk_bbox(center, radius, cfg.width, cfg.height);
    }
    add_pixel_noise(image, rng);
    item.labeled.image = std::move(image);
    corpus.push_back(std::move(item));
  }
  return corpus;
}

std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<CorpusItem>& corpus,
                                   const std::string& label_name) {
  std::filesystem::create_directories(dir / "images");
  std::vector<LabelRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i << ".ppm";
    const auto path = dir / "images" / name.str();
    write_ppm(path, corpus[i].labeled.image);
    records.push_back({path, corpus[i].labeled.bbox});
  }
  const auto label_path = dir / label_name;
  save_labels(label_path, records);
  return label_path;
}

Scene make_scene(const SceneConfig& cfg) {
  if (cfg.frames < 0) throw std::invalid_argument("frame count must be non-negative");
  if (cfg.corrupt_camera >= cfg.cameras) {
    throw std::invalid_argument("corrupt camera index out of range");
  }
  Scene scene;
  scene.config = cfg;
  scene.rig = synthetic_rig(cfg.cameras, cfg.workspace, cfg.image);
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x5ce7e));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box& box = cfg.workspace;
  for (int f = 0; f < cfg.frames; ++f) {
    SceneFrame frame;
    frame.frame = f;
    frame.position = box.min + (box.max - box.min).cwiseProduct(
                                   Vec3(unit(rng), unit(rng), unit(rng)));
    frame.corrupted = cfg.corrupt_camera >= 0 && unit(rng) < cfg.corrupt_rate;
    scene.frames.push_back(frame);
  }
  return scene;
}

double projected_radius(const Point3& X, double radius, const CameraModel& cam) {
  const Vec3 ray = X - cam.center();
  Vec3 perp = ray.cross(Vec3::UnitZ());
  if (perp.squaredNorm() < 1e-18) perp = ray.cross(Vec3::UnitX());
  perp.normalize();
  const Pixel a = project(X, cam);
  const Pixel b = project(X + radius * perp, cam);
  return std::hypot(b.u - a.u, b.v - a.v);
}

ColorImage render_view(const Scene& scene, std::size_t frame_index, std::size_t camera_index) {
  const SceneFrame& frame = scene.frames.at(frame_index);
  const CameraModel& cam = scene.rig.at(camera_index);
  std::mt19937_64 rng(mix_seed(scene.config.seed, static_cast<std::uint64_t>(frame.frame),
                               static_cast<std::uint64_t>(cam.id()) + 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ColorImage image = render_background(cam.width(), cam.height(), rng);
  const Pixel truth = project(frame.position, cam);
  const double radius = projected_radius(frame.position, scene.config.ball_radius, cam);

  if (frame.corrupted && cam.id() == scene.config.corrupt_camera) {
    const double margin = radius + 2.0;
    Pixel fake;
    do {
      fake = {margin + unit(rng) * (cam.width() - 2 * margin),
              margin + unit(rng) * (cam.height() - 2 * margin)};
    } while (std::hypot(fake.u - truth.u, fake.v - truth.v) < 40.0);
    draw_disk(image, fake, radius, kBallColor);
  } else {
    draw_disk(image, truth, radius, kBallColor);
  }
  add_pixel_noise(image, rng);
  return image;
}

void write_scene(const std::filesystem::path& dir, const Scene& scene) {
  std::filesystem::create_directories(dir);
  save_calibration(dir / "calib.json", scene.rig);
  for (const CameraModel& cam : scene.rig) {
    std::filesystem::create_directories(dir / "images" / ("cam" + std::to_string(cam.id())));
  }
  std::ofstream manifest(dir / "manifest.txt");
  std::ofstream truth(dir / "truth.csv");
  truth << "frame,x,y,z,corrupted_camera\n" << std::setprecision(17);
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const SceneFrame& frame = scene.frames[f];
    for (std::size_t c = 0; c < scene.rig.size(); ++c) {
      const int id = scene.rig[c].id();
      const auto rel = frame_image_path(id, frame.frame);
      write_ppm(dir / rel, render_view(scene, f, c));
      manifest << id << ' ' << frame.frame << ' ' << rel.generic_string() << '\n';
    }
    truth << frame.frame << ',' << frame.position.x() << ',' << frame.position.y() << ','
          << frame.position.z() << ',' << (frame.corrupted ? scene.config.corrupt_camera : -1)
          << '\n';
  }
}

}  // namespace balltrack
