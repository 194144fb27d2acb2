#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "balltrack/geometry.hpp"

namespace fixtures {

using balltrack::Box;
using balltrack::CameraModel;
using balltrack::Point3;
using balltrack::Vec3;

inline Point3 uniform_in(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return box.min + (box.max - box.min).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
}

/// `count` cameras at random positions on a shell around the origin, each
/// aimed near the origin, with ids 0..count-1 shuffled.
inline std::vector<CameraModel> random_rig(int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<int> ids(count);
  for (int i = 0; i < count; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<CameraModel> rig;
  for (int i = 0; i < count; ++i) {
    Vec3 dir(u(rng), u(rng), 0.3 + 0.7 * std::abs(u(rng)));
    dir.normalize();
    const Point3 center = (3.0 + u(rng)) * dir;
    const Point3 target(0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng));
    const double f = 500.0 + 100.0 * u(rng);
    rig.emplace_back(ids[i], balltrack::look_at_projection(center, target, f, 320, 240), 640,
                     480);
  }
  return rig;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("balltrack-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
