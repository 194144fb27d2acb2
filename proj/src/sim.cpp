#include "balltrack/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace balltrack {

namespace {

// Keeps benchmarked results observable.
volatile double benchmark_sink = 0.0;

}  // namespace

Box default_workspace() { return {Point3(-2.0, -1.5, 0.0), Point3(2.0, 1.5, 2.0)}; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

std::vector<PixelObservation> simulate_observations(const Point3& X,
                                                    const std::vector<CameraModel>& rig,
                                                    const ObservationNoise& noise,
                                                    std::mt19937_64& rng,
                                                    std::vector<char>* outlier_flags) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PixelObservation> out;
  out.reserve(rig.size());
  if (outlier_flags) outlier_flags->assign(rig.size(), 0);
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const CameraModel& cam = rig[i];
    Pixel px = project(X, cam);
    if (noise.pixel_sigma > 0.0) {
      px.u += noise.pixel_sigma * gauss(rng);
      px.v += noise.pixel_sigma * gauss(rng);
    }
    if (noise.outlier_prob > 0.0 && unit(rng) < noise.outlier_prob) {
      px.u = unit(rng) * cam.width();
      px.v = unit(rng) * cam.height();
      if (outlier_flags) (*outlier_flags)[i] = 1;
    }
    out.push_back({cam.id(), px, 0});
  }
  return out;
}

std::vector<View> make_views(const std::vector<PixelObservation>& obs,
                             const std::vector<CameraModel>& rig) {
  std::vector<View> views;
  views.reserve(obs.size());
  for (const PixelObservation& o : obs) {
    const auto it = std::find_if(rig.begin(), rig.end(),
                                 [&](const CameraModel& c) { return c.id() == o.camera_id; });
    if (it == rig.end()) {
      throw std::invalid_argument("observation from unknown camera " +
                                  std::to_string(o.camera_id));
    }
    views.push_back({o.pixel, &*it});
  }
  return views;
}

void OutlierStudyConfig::validate() const {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  if (pixel_noise_sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (cameras.empty() || outlier_probs.empty()) {
    throw std::invalid_argument("camera and outlier lists must be non-empty");
  }
  for (int c : cameras) {
    if (c < 2) throw std::invalid_argument("camera counts must be at least 2");
  }
  for (double p : outlier_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must be in [0, 1]");
  }
}

double StudyCell::standard_error_cm() const {
  const long long successes = trials - failures;
  if (successes < 2) return 0.0;
  return error_stddev_cm / std::sqrt(static_cast<double>(successes));
}

std::vector<StudyCell> run_outlier_study(const OutlierStudyConfig& cfg) {
  cfg.validate();
  FusionConfig fusion;
  fusion.epsilon = cfg.epsilon;

  std::vector<StudyCell> cells;
  std::uint64_t cell_index = 0;
  for (int c : cfg.cameras) {
    const std::vector<CameraModel> rig = synthetic_rig(c, cfg.workspace, cfg.image_size);
    for (double p : cfg.outlier_probs) {
      StudyCell cell;
      cell.cameras = c;
      cell.outlier_prob = p;
      cell.trials = cfg.trials;
      const ObservationNoise noise{cfg.pixel_noise_sigma, p};

      // Welford accumulation over successful trials.
      long long n = 0;
      double mean = 0.0;
      double m2 = 0.0;
      for (int trial = 0; trial < cfg.trials; ++trial) {
        std::mt19937_64 rng(mix_seed(cfg.seed, cell_index, static_cast<std::uint64_t>(trial)));
        std::uniform_real_distribution<double> ux(cfg.workspace.min.x(), cfg.workspace.max.x());
        std::uniform_real_distribution<double> uy(cfg.workspace.min.y(), cfg.workspace.max.y());
        std::uniform_real_distribution<double> uz(cfg.workspace.min.z(), cfg.workspace.max.z());
        const Point3 X(ux(rng), uy(rng), uz(rng));
        const auto obs = simulate_observations(X, rig, noise, rng);
        const auto views = make_views(obs, rig);
        const FusionResult result = fuse(views, fusion);
        if (!result.ok()) {
          ++cell.failures;
          continue;
        }
        const double err = 100.0 * (result.success().position - X).norm();
        ++n;
        const double delta = err - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (err - mean);
      }
      cell.mean_error_cm = mean;
      cell.error_stddev_cm = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
      cell.failure_rate = static_cast<double>(cell.failures) / static_cast<double>(cell.trials);
      cells.push_back(cell);
      ++cell_index;
    }
  }
  return cells;
}

std::vector<RuntimeRow> run_runtime_benchmark(const std::vector<int>& cameras, int reps,
                                              std::uint64_t seed) {
  if (reps < 100) throw std::invalid_argument("benchmark needs at least 100 repetitions");
  using clock = std::chrono::steady_clock;
  const Box workspace = default_workspace();
  FusionConfig fusion;
  std::vector<RuntimeRow> rows;
  for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
    const int c = cameras[ci];
    const std::vector<CameraModel> rig = synthetic_rig(c, workspace);
    std::mt19937_64 rng(mix_seed(seed, ci));
    std::uniform_real_distribution<double> ux(workspace.min.x(), workspace.max.x());
    std::uniform_real_distribution<double> uy(workspace.min.y(), workspace.max.y());
    std::uniform_real_distribution<double> uz(workspace.min.z(), workspace.max.z());
    std::vector<std::vector<View>> inputs;
    inputs.reserve(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
      const Point3 X(ux(rng), uy(rng), uz(rng));
      inputs.push_back(make_views(simulate_observations(X, rig, {1.3, 0.0}, rng), rig));
    }

    double sink = 0.0;
    const int warmup = std::min(reps, 10);
    for (int r = 0; r < warmup; ++r) {
      const auto res = fuse(inputs[r], fusion);
      if (res.ok()) sink += res.success().position.x();
    }
    std::vector<double> times_ms;
    times_ms.reserve(inputs.size());
    for (const auto& views : inputs) {
      const auto start = clock::now();
      const auto res = fuse(views, fusion);
      const auto stop = clock::now();
      if (res.ok()) sink += res.success().position.x();
      times_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    benchmark_sink = sink;

    RuntimeRow row;
    row.cameras = c;
    double total = 0.0;
    for (double t : times_ms) total += t;
    row.mean_ms = total / static_cast<double>(times_ms.size());
    std::sort(times_ms.begin(), times_ms.end());
    const auto p99_index = static_cast<std::size_t>(
        std::ceil(0.99 * static_cast<double>(times_ms.size()))) - 1;
    row.p99_ms = times_ms[std::min(p99_index, times_ms.size() - 1)];
    rows.push_back(row);
  }
  return rows;
}

double loglog_slope(const std::vector<RuntimeRow>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("slope needs at least two rows");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const RuntimeRow& r : rows) {
    const double x = std::log(static_cast<double>(r.cameras));
    const double y = std::log(r.mean_ms);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void TrajectoryStudyConfig::validate() const {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  if (noise_sigma < 0.0) throw std::invalid_argument("noise must be non-negative");
  if (!(dt > 0.0) || !(rate_hz > 0.0)) throw std::invalid_argument("dt and rate must be positive");
  if (!(flight_end > observe_until)) {
    throw std::invalid_argument("flight_end must come after observe_until");
  }
  const double stride = 1.0 / (rate_hz * dt);
  if (std::abs(stride - std::round(stride)) > 1e-9) {
    throw std::invalid_argument("observation period must be a multiple of dt");
  }
  for (int order : orders) {
    if (order < 2 || order > 4) throw std::invalid_argument("orders must be 2, 3 or 4");
  }
  for (int n : obs_counts) {
    if (n < 5) throw std::invalid_argument("observation counts must be at least 5");
    if ((n - 1) / rate_hz > observe_until + 1e-12) {
      throw std::invalid_argument("observation window starts before launch");
    }
  }
}

BallState random_serve(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BallState s;
  s.t = 0.0;
  s.x = Point3(-0.5 + unit(rng), -1.7 + 0.4 * unit(rng), 0.25 + 0.3 * unit(rng));
  const double speed = 4.0 + 4.0 * unit(rng);
  const double yaw = -0.15 + 0.3 * unit(rng);
  const double pitch = 0.05 + 0.3 * unit(rng);
  s.v = speed * Vec3(std::sin(yaw) * std::cos(pitch), std::cos(yaw) * std::cos(pitch),
                     std::sin(pitch));
  return s;
}

TrajectoryTable run_trajectory_study(const TrajectoryStudyConfig& cfg) {
  cfg.validate();
  TrajectoryTable table;
  table.orders = cfg.orders;
  table.obs_counts = cfg.obs_counts;
  table.error_cm.assign(cfg.orders.size(), std::vector<double>(cfg.obs_counts.size(), 0.0));

  const auto stride = static_cast<std::size_t>(std::llround(1.0 / (cfg.rate_hz * cfg.dt)));
  const auto cut = static_cast<std::size_t>(std::llround(cfg.observe_until / cfg.dt));
  const int max_count = *std::max_element(cfg.obs_counts.begin(), cfg.obs_counts.end());

  for (int trial = 0; trial < cfg.trials; ++trial) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(trial)));
    const BallState launch = random_serve(rng);
    const std::vector<BallState> truth = integrate(launch, cfg.model, cfg.dt, cfg.flight_end);
    const std::span<const BallState> future(truth.begin() + static_cast<long>(cut), truth.end());

    // Noisy samples at the observation rate, newest last; every cell reuses
    // the tail of the same sequence.
    std::normal_distribution<double> gauss(0.0, cfg.noise_sigma);
    std::vector<TimedObservation> observed(static_cast<std::size_t>(max_count));
    for (int k = 0; k < max_count; ++k) {
      const BallState& s = truth[cut - stride * static_cast<std::size_t>(max_count - 1 - k)];
      Point3 x = s.x;
      if (cfg.noise_sigma > 0.0) x += Vec3(gauss(rng), gauss(rng), gauss(rng));
      observed[static_cast<std::size_t>(k)] = {s.t, x};
    }

    const double horizon = truth.back().t - truth[cut].t;
    for (std::size_t oi = 0; oi < cfg.orders.size(); ++oi) {
      for (std::size_t ni = 0; ni < cfg.obs_counts.size(); ++ni) {
        const std::span<const TimedObservation> window(
            observed.end() - cfg.obs_counts[ni], observed.end());
        const auto predicted = predict(window, cfg.orders[oi], cfg.model, horizon, cfg.dt);
        table.error_cm[oi][ni] += prediction_error(predicted, future);
      }
    }
  }
  for (auto& row : table.error_cm) {
    for (double& e : row) e /= static_cast<double>(cfg.trials);
  }
  return table;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

std::string format_outlier_table(const std::vector<StudyCell>& cells, bool json) {
  if (json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const StudyCell& c : cells) {
      doc.push_back({{"cameras", c.cameras},
                     {"outlier_prob", c.outlier_prob},
                     {"mean_error_cm", c.mean_error_cm},
                     {"error_stddev_cm", c.error_stddev_cm},
                     {"failure_rate", c.failure_rate},
                     {"trials", c.trials},
                     {"failures", c.failures}});
    }
    return nlohmann::json{{"outlier_study", doc}}.dump(2) + "\n";
  }
  std::vector<double> probs;
  for (const StudyCell& c : cells) {
    if (std::find(probs.begin(), probs.end(), c.outlier_prob) == probs.end()) {
      probs.push_back(c.outlier_prob);
    }
  }
  std::ostringstream out;
  out << "c\tstat";
  for (double p : probs) out << '\t' << fixed(100.0 * p, 1) << '%';
  out << '\n';
  for (std::size_t i = 0; i < cells.size(); i += probs.size()) {
    out << cells[i].cameras << "\tE_cm";
    for (std::size_t j = 0; j < probs.size(); ++j) out << '\t' << fixed(cells[i + j].mean_error_cm, 4);
    out << '\n' << cells[i].cameras << "\tF_pct";
    for (std::size_t j = 0; j < probs.size(); ++j) {
      out << '\t' << fixed(100.0 * cells[i + j].failure_rate, 3);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_runtime_table(const std::vector<RuntimeRow>& rows, bool json) {
  const bool has_slope = rows.size() >= 2;
  if (json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const RuntimeRow& r : rows) {
      doc.push_back({{"cameras", r.cameras}, {"mean_ms", r.mean_ms}, {"p99_ms", r.p99_ms}});
    }
    nlohmann::json out{{"runtime", doc}};
    if (has_slope) out["loglog_slope"] = loglog_slope(rows);
    return out.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "cameras\tmean_ms\tp99_ms\n";
  for (const RuntimeRow& r : rows) {
    out << r.cameras << '\t' << fixed(r.mean_ms, 4) << '\t' << fixed(r.p99_ms, 4) << '\n';
  }
  if (has_slope) out << "# loglog_slope\t" << fixed(loglog_slope(rows), 3) << '\n';
  return out.str();
}

std::string format_trajectory_table(const TrajectoryTable& table, bool json) {
  if (json) {
    nlohmann::json doc{{"orders", table.orders},
                       {"obs_counts", table.obs_counts},
                       {"error_cm", table.error_cm}};
    return nlohmann::json{{"trajectory_study", doc}}.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "order";
  for (int n : table.obs_counts) out << '\t' << n;
  out << '\n';
  for (std::size_t i = 0; i < table.orders.size(); ++i) {
    out << table.orders[i];
    for (double e : table.error_cm[i]) out << '\t' << fixed(e, 3);
    out << '\n';
  }
  return out.str();
}

}  // namespace balltrack
