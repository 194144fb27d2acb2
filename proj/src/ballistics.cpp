#include "balltrack/ballistics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace balltrack {

Vec3 accel(const BallState& state, const FlightModel& model) {
  return model.gravity - model.beta0 * state.v.norm() * state.v -
         model.beta1 * model.spin.cross(state.v);
}

namespace {

BallState rk4_step(const BallState& s, const FlightModel& m, double h) {
  auto derivative = [&m](const BallState& y) { return accel(y, m); };

  const Vec3 k1x = s.v;
  const Vec3 k1v = derivative(s);
  const BallState s2{s.t + 0.5 * h, s.x + 0.5 * h * k1x, s.v + 0.5 * h * k1v};
  const Vec3 k2x = s2.v;
  const Vec3 k2v = derivative(s2);
  const BallState s3{s.t + 0.5 * h, s.x + 0.5 * h * k2x, s.v + 0.5 * h * k2v};
  const Vec3 k3x = s3.v;
  const Vec3 k3v = derivative(s3);
  const BallState s4{s.t + h, s.x + h * k3x, s.v + h * k3v};
  const Vec3 k4x = s4.v;
  const Vec3 k4v = derivative(s4);

  return {s.t + h, s.x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
          s.v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

}  // namespace

std::vector<BallState> integrate(const BallState& s0, const FlightModel& model, double dt,
                                 double horizon) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be non-negative");
  if (!s0.x.allFinite() || !s0.v.allFinite() || !std::isfinite(s0.t)) {
    throw std::invalid_argument("initial state is not finite");
  }

  std::vector<BallState> out;
  out.reserve(static_cast<std::size_t>(horizon / dt) + 2);
  out.push_back(s0);
  // Steps shorter than this fraction of dt are absorbed into the last one.
  const double slack = 1e-9 * dt;
  BallState s = s0;
  for (long long k = 0;; ++k) {
    const double elapsed = static_cast<double>(k) * dt;
    const double remaining = horizon - elapsed;
    if (remaining <= slack) break;
    const double h = remaining < dt + slack ? remaining : dt;
    s = rk4_step(s, model, h);
    s.t = remaining < dt + slack ? s0.t + horizon : s0.t + elapsed + dt;
    if (!s.x.allFinite() || !s.v.allFinite()) {
      throw BallisticsError("integration blew up at step " + std::to_string(k + 1));
    }
    out.push_back(s);
    if (h != dt) break;
  }
  return out;
}

BallState fit_initial_state(std::span<const TimedObservation> obs, int order) {
  if (order < 2 || order > 4) throw std::invalid_argument("polynomial order must be 2, 3 or 4");
  const int n = static_cast<int>(obs.size());
  if (n < order + 1) {
    throw BallisticsError("need at least " + std::to_string(order + 1) +
                          " observations for an order-" + std::to_string(order) + " fit");
  }
  for (int i = 1; i < n; ++i) {
    if (obs[i].t == obs[i - 1].t) throw BallisticsError("duplicate observation times");
    if (obs[i].t < obs[i - 1].t) {
      throw std::invalid_argument("observation times must be strictly increasing");
    }
  }

  const double t_last = obs.back().t;
  // Normalized time tau = (t - t_last) / span keeps the powers near unit scale.
  const double span = t_last - obs.front().t;
  Eigen::MatrixXd design(n, order + 1);
  Eigen::MatrixXd targets(n, 3);
  for (int i = 0; i < n; ++i) {
    const double tau = (obs[i].t - t_last) / span;
    double p = 1.0;
    for (int k = 0; k <= order; ++k) {
      design(i, k) = p;
      p *= tau;
    }
    targets.row(i) = obs[i].x.transpose();
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < order + 1) throw BallisticsError("rank-deficient polynomial design");
  const Eigen::MatrixXd coef = qr.solve(targets);

  BallState state;
  state.t = t_last;
  state.x = coef.row(0).transpose();
  state.v = coef.row(1).transpose() / span;
  return state;
}

std::vector<BallState> predict(std::span<const TimedObservation> obs, int order,
                               const FlightModel& model, double horizon, double dt) {
  return integrate(fit_initial_state(obs, order), model, dt, horizon);
}

double prediction_error(std::span<const BallState> predicted, std::span<const BallState> truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw std::invalid_argument("prediction and truth grids differ in length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (std::abs(predicted[i].t - truth[i].t) > 1e-9) {
      throw std::invalid_argument("prediction and truth grids differ at sample " +
                                  std::to_string(i));
    }
    sum += (predicted[i].x - truth[i].x).norm();
  }
  return 100.0 * sum / static_cast<double>(predicted.size());
}

void write_trajectory(const std::filesystem::path& path, std::span<const BallState> states) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory " + path.string());
  out << "t,x,y,z,vx,vy,vz\n" << std::setprecision(17);
  for (const BallState& s : states) {
    out << s.t << ',' << s.x.x() << ',' << s.x.y() << ',' << s.x.z() << ',' << s.v.x() << ','
        << s.v.y() << ',' << s.v.z() << '\n';
  }
}

std::vector<BallState> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,y,z", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing `t,x,y,z` header row");
  }
  std::vector<BallState> states;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": not a number: " + cell);
      }
    }
    if (values.size() != 4 && values.size() != 7) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 4 or 7 columns");
    }
    BallState s;
    s.t = values[0];
    s.x = {values[1], values[2], values[3]};
    if (values.size() == 7) s.v = {values[4], values[5], values[6]};
    states.push_back(s);
  }
  return states;
}

}  // namespace balltrack
