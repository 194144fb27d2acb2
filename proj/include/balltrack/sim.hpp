#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "balltrack/ballistics.hpp"
#include "balltrack/fusion.hpp"
#include "balltrack/geometry.hpp"

namespace balltrack {

/// Workspace used by the studies: 4 m x 3 m x 2 m.
Box default_workspace();

/// splitmix64 finalizer; derives independent per-trial seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct ObservationNoise {
  double pixel_sigma = 1.3;
  double outlier_prob = 0.0;
};

/// Projects X into every camera, adds isotropic Gaussian pixel noise and with
/// probability outlier_prob replaces the pixel by a uniform draw over the
/// image. `outlier_flags`, when given, receives 1 for replaced cameras.
std::vector<PixelObservation> simulate_observations(const Point3& X,
                                                    const std::vector<CameraModel>& rig,
                                                    const ObservationNoise& noise,
                                                    std::mt19937_64& rng,
                                                    std::vector<char>* outlier_flags = nullptr);

/// Pairs observations with their cameras (looked up by id).
std::vector<View> make_views(const std::vector<PixelObservation>& obs,
                             const std::vector<CameraModel>& rig);

struct OutlierStudyConfig {
  std::vector<int> cameras{4, 8, 15, 30};
  std::vector<double> outlier_probs{0.01, 0.05, 0.10, 0.25, 0.50};
  double pixel_noise_sigma = 1.3;
  int trials = 10000;
  double epsilon = 5.0;
  Box workspace = default_workspace();
  ImageSize image_size{};
  std::uint64_t seed = 7;

  void validate() const;
};

struct StudyCell {
  int cameras = 0;
  double outlier_prob = 0.0;
  double mean_error_cm = 0.0;    // over non-failed trials
  double error_stddev_cm = 0.0;  // sample standard deviation of the same
  double failure_rate = 0.0;
  long long trials = 0;
  long long failures = 0;

  double standard_error_cm() const;
};

/// Cells are ordered by camera count, then outlier probability.
std::vector<StudyCell> run_outlier_study(const OutlierStudyConfig& cfg);

struct RuntimeRow {
  int cameras = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
};

std::vector<RuntimeRow> run_runtime_benchmark(const std::vector<int>& cameras, int reps,
                                              std::uint64_t seed = 7);

/// Least-squares slope of log(mean_ms) against log(cameras).
double loglog_slope(const std::vector<RuntimeRow>& rows);

struct TrajectoryStudyConfig {
  std::vector<int> orders{2, 3, 4};
  std::vector<int> obs_counts{12, 25, 50, 75};
  int trials = 500;
  double noise_sigma = 0.01;  // m, isotropic on 3D observations
  std::uint64_t seed = 7;
  FlightModel model{};
  double rate_hz = 200.0;
  double dt = 1e-3;
  double observe_until = 0.4;  // s, last observation time
  double flight_end = 1.2;     // s, end of the predicted window

  void validate() const;
};

struct TrajectoryTable {
  std::vector<int> orders;
  std::vector<int> obs_counts;
  std::vector<std::vector<double>> error_cm;  // [order][count]
};

/// Random serve-like launch: speed 4-8 m/s along +y towards the table.
BallState random_serve(std::mt19937_64& rng);

TrajectoryTable run_trajectory_study(const TrajectoryStudyConfig& cfg);

std::string format_outlier_table(const std::vector<StudyCell>& cells, bool json);
std::string format_runtime_table(const std::vector<RuntimeRow>& rows, bool json);
std::string format_trajectory_table(const TrajectoryTable& table, bool json);

}  // namespace balltrack
