#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "balltrack/geometry.hpp"

namespace balltrack {

/// Flight ODE: a = g - beta0 |v| v - beta1 (spin x v).
/// beta0 is in 1/m. Spin defaults to zero (ignored).
struct FlightModel {
  Vec3 gravity{0.0, 0.0, -9.81};
  double beta0 = 0.15;
  double beta1 = 0.012;
  Vec3 spin = Vec3::Zero();
};

struct BallState {
  double t = 0.0;
  Point3 x = Point3::Zero();
  Vec3 v = Vec3::Zero();
};

struct TimedObservation {
  double t = 0.0;
  Point3 x = Point3::Zero();
};

class BallisticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Vec3 accel(const BallState& state, const FlightModel& model);

/// Fixed-step classical RK4 from s0.t to s0.t + horizon. The last step is
/// shortened to land on the horizon. The result starts with s0.
std::vector<BallState> integrate(const BallState& s0, const FlightModel& model, double dt,
                                 double horizon);

/// Per-axis least-squares polynomial in (t - t_last); returns position and
/// velocity at the last observation. order is 2, 3 or 4.
BallState fit_initial_state(std::span<const TimedObservation> obs, int order);

std::vector<BallState> predict(std::span<const TimedObservation> obs, int order,
                               const FlightModel& model, double horizon, double dt);

/// Mean Euclidean distance over matching time grids, in centimeters.
double prediction_error(std::span<const BallState> predicted, std::span<const BallState> truth);

/// CSV with header `t,x,y,z,vx,vy,vz` (velocity columns optional on read).
void write_trajectory(const std::filesystem::path& path, std::span<const BallState> states);
std::vector<BallState> read_trajectory(const std::filesystem::path& path);

}  // namespace balltrack
