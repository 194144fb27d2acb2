#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "CLI11.hpp"
#include "balltrack/ballistics.hpp"
#include "balltrack/calibration.hpp"
#include "balltrack/detect.hpp"
#include "balltrack/pipeline.hpp"
#include "balltrack/sim.hpp"
#include "balltrack/synth.hpp"

namespace balltrack::cli {

namespace {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes to `path` when set, otherwise to `fallback`.
void emit(const std::string& path, std::ostream& fallback,
          const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(fallback);
    fallback.flush();
    return;
  }
  std::ofstream file(path);
  if (!file) throw InputError("cannot open " + path + " for writing");
  body(file);
  if (!file) throw InputError("write to " + path + " failed");
}

struct TrainArgs {
  std::string labels;
  std::string out;
  TrainParams params;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const std::vector<LabelRecord> records = load_labels(a.labels);
  if (records.empty()) throw InputError("label file " + a.labels + " lists no images");
  std::vector<LabeledImage> data;
  data.reserve(records.size());
  for (const LabelRecord& r : records) data.push_back({read_ppm(r.image), r.bbox});
  const TrainReport report = train_with_report(data, a.params);
  save_model(a.out, report.unit);
  const double final_loss =
      report.epoch_loss.empty() ? report.initial_loss : report.epoch_loss.back();
  out << "final_loss " << std::setprecision(6) << final_loss << '\n';
  return kExitOk;
}

struct DetectArgs {
  std::string model;
  std::string calib;
  std::string manifest;
  std::string dirs;
  std::string out;
  DetectorConfig detector;
};

int cmd_detect(const DetectArgs& a, std::ostream& out) {
  a.detector.validate();
  const ConvUnit unit = load_model(a.model);
  const std::vector<CameraModel> cameras = load_calibration(a.calib);
  const std::vector<ManifestEntry> entries =
      a.manifest.empty() ? scan_camera_dirs(a.dirs) : load_manifest(a.manifest);
  std::set<int> known;
  for (const CameraModel& c : cameras) known.insert(c.id());
  for (const ManifestEntry& e : entries) {
    if (!known.count(e.camera_id)) {
      throw InputError("image " + e.image.string() + " is tagged with unknown camera " +
                       std::to_string(e.camera_id));
    }
  }
  emit(a.out, out, [&](std::ostream& sink) { run_detection(entries, unit, a.detector, sink); });
  return kExitOk;
}

struct TrackArgs {
  std::string calib;
  std::string detections = "-";
  std::string out;
  FusionConfig fusion;
  TrackerOptions options;
};

int cmd_track(const TrackArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  a.fusion.validate();
  Tracker tracker(load_calibration(a.calib), a.fusion, a.options);
  std::ifstream file;
  std::istream* source = &in;
  if (a.detections != "-") {
    file.open(a.detections);
    if (!file) throw InputError("cannot open detections " + a.detections);
    source = &file;
  }
  emit(a.out, out, [&](std::ostream& sink) {
    const auto write = [&sink](const std::vector<TrackRecord>& records) {
      for (const TrackRecord& r : records) sink << format_track(r) << '\n';
    };
    std::string line;
    long long line_no = 0;
    while (std::getline(*source, line)) {
      ++line_no;
      const bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (!blank && !parse_detection(line)) {
        err << "warning: line " << line_no << ": malformed detection record skipped\n";
      }
      write(tracker.push_line(line));
    }
    write(tracker.finish());
  });
  err << tracker.summary() << '\n';
  return kExitOk;
}

struct SimulateArgs {
  OutlierStudyConfig study;
  bool json = false;
  std::string out;
};

struct BenchArgs {
  std::vector<int> cameras{4, 8, 15, 30, 50};
  int reps = 1000;
  std::uint64_t seed = 7;
  bool json = false;
  std::string out;
};

struct TrajArgs {
  TrajectoryStudyConfig study;
  bool json = false;
  std::string out;
};

struct CorpusArgs {
  std::string out;
  CorpusConfig corpus;
};

struct SceneArgs {
  std::string out;
  SceneConfig scene;
};

int dispatch(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const TrainError& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == TrainError::Kind::kDiverged ? kExitNumeric : kExitInput;
  } catch (const BallisticsError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const GeometryError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    // Unreadable files, malformed documents and invalid parameters.
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Multi-camera ball detection, 3D fusion and flight prediction"};
  app.name(args.empty() ? "balltrack" : args.front());
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train the pixel classifier on a labeled corpus");
  train->add_option("--labels", train_args.labels, "Label file")->required();
  train->add_option("--out", train_args.out, "Model file to write")->required();
  train->add_option("--lr", train_args.params.learning_rate, "Learning rate")
      ->capture_default_str();
  train->add_option("--epochs", train_args.params.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch", train_args.params.batch_size, "Mini-batch size")
      ->capture_default_str();
  train->add_option("--seed", train_args.params.seed, "Initialization and shuffle seed")
      ->capture_default_str();

  DetectArgs detect_args;
  auto* detect = app.add_subcommand("detect", "Detect the ball in tagged camera images");
  detect->add_option("--model", detect_args.model, "Model file")->required();
  detect->add_option("--calib", detect_args.calib, "Calibration file")->required();
  auto* manifest = detect->add_option("--manifest", detect_args.manifest,
                                      "Manifest of `camera_id frame path` lines");
  auto* dirs = detect->add_option("--dirs", detect_args.dirs,
                                  "Root holding cam<id>/<frame>.ppm images");
  manifest->excludes(dirs);
  detect->add_option("--out", detect_args.out, "Output stream (default stdout)");
  detect->add_option("--high", detect_args.detector.t_high, "Seed threshold")
      ->capture_default_str();
  detect->add_option("--low", detect_args.detector.t_low, "Growth threshold")
      ->capture_default_str();
  detect->add_option("--connectivity", detect_args.detector.connectivity, "4 or 8")
      ->check(CLI::IsMember({4, 8}))
      ->capture_default_str();

  TrackArgs track_args;
  auto* track = app.add_subcommand("track", "Fuse per-camera detections into 3D positions");
  track->add_option("--calib", track_args.calib, "Calibration file")->required();
  track->add_option("--detections", track_args.detections, "Detection stream, - for stdin")
      ->capture_default_str();
  track->add_option("--epsilon", track_args.fusion.epsilon, "Inlier threshold (px)")
      ->capture_default_str();
  track->add_option("--min-inliers", track_args.fusion.min_inliers, "Smallest accepted set")
      ->capture_default_str();
  track->add_option("--fps", track_args.options.fps, "Frame rate for records without t")
      ->capture_default_str();
  track->add_flag("--latency", track_args.options.report_latency,
                  "Report wall-clock latency per record");
  track->add_option("--out", track_args.out, "Output stream (default stdout)");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Outlier study over camera counts");
  simulate->add_option("--cameras", sim_args.study.cameras, "Camera counts")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--outliers", sim_args.study.outlier_probs, "Outlier probabilities")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--sigma", sim_args.study.pixel_noise_sigma, "Pixel noise (px)")
      ->capture_default_str();
  simulate->add_option("--epsilon", sim_args.study.epsilon, "Inlier threshold (px)")
      ->capture_default_str();
  simulate->add_option("--trials", sim_args.study.trials, "Trials per cell")
      ->capture_default_str();
  simulate->add_option("--seed", sim_args.study.seed, "Seed")->capture_default_str();
  simulate->add_flag("--json", sim_args.json, "JSON output");
  simulate->add_option("--out", sim_args.out, "Output file (default stdout)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Fusion runtime per camera count");
  bench->add_option("--cameras", bench_args.cameras, "Camera counts")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--reps", bench_args.reps, "Timed calls per count (>= 100)")
      ->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "Seed")->capture_default_str();
  bench->add_flag("--json", bench_args.json, "JSON output");
  bench->add_option("--out", bench_args.out, "Output file (default stdout)");

  TrajArgs traj_args;
  auto* traj = app.add_subcommand("traj", "Trajectory prediction error per fit order");
  traj->add_option("--orders", traj_args.study.orders, "Polynomial orders")
      ->delimiter(',')
      ->capture_default_str();
  traj->add_option("--counts", traj_args.study.obs_counts, "Observation counts")
      ->delimiter(',')
      ->capture_default_str();
  traj->add_option("--trials", traj_args.study.trials, "Trajectories")->capture_default_str();
  traj->add_option("--noise", traj_args.study.noise_sigma, "Observation noise (m)")
      ->capture_default_str();
  traj->add_option("--seed", traj_args.study.seed, "Seed")->capture_default_str();
  traj->add_flag("--json", traj_args.json, "JSON output");
  traj->add_option("--out", traj_args.out, "Output file (default stdout)");

  CorpusArgs corpus_args;
  auto* corpus = app.add_subcommand("synth-corpus", "Render a labeled disk corpus");
  corpus->add_option("--out", corpus_args.out, "Output directory")->required();
  corpus->add_option("--count", corpus_args.corpus.count, "Images")->capture_default_str();
  corpus->add_option("--width", corpus_args.corpus.width, "Image width")->capture_default_str();
  corpus->add_option("--height", corpus_args.corpus.height, "Image height")
      ->capture_default_str();
  corpus->add_option("--seed", corpus_args.corpus.seed, "Seed")->capture_default_str();

  SceneArgs scene_args;
  auto* scene = app.add_subcommand("synth-scene", "Render a multi-camera image sequence");
  scene->add_option("--out", scene_args.out, "Output directory")->required();
  scene->add_option("--cameras", scene_args.scene.cameras, "Cameras")->capture_default_str();
  scene->add_option("--frames", scene_args.scene.frames, "Frames")->capture_default_str();
  scene->add_option("--corrupt-camera", scene_args.scene.corrupt_camera,
                    "Camera showing a distractor on some frames, -1 for none")
      ->capture_default_str();
  scene->add_option("--corrupt-rate", scene_args.scene.corrupt_rate,
                    "Fraction of corrupted frames")
      ->capture_default_str();
  scene->add_option("--seed", scene_args.scene.seed, "Seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (*train) return dispatch([&] { return cmd_train(train_args, out); }, err);
  if (*detect) {
    if (detect_args.manifest.empty() == detect_args.dirs.empty()) {
      err << "error: detect needs exactly one of --manifest or --dirs\n";
      return kExitInput;
    }
    return dispatch([&] { return cmd_detect(detect_args, out); }, err);
  }
  if (*track) return dispatch([&] { return cmd_track(track_args, in, out, err); }, err);
  if (*simulate) {
    return dispatch(
        [&] {
          const auto cells = run_outlier_study(sim_args.study);
          emit(sim_args.out, out,
               [&](std::ostream& s) { s << format_outlier_table(cells, sim_args.json); });
          return kExitOk;
        },
        err);
  }
  if (*bench) {
    return dispatch(
        [&] {
          const auto rows =
              run_runtime_benchmark(bench_args.cameras, bench_args.reps, bench_args.seed);
          emit(bench_args.out, out,
               [&](std::ostream& s) { s << format_runtime_table(rows, bench_args.json); });
          return kExitOk;
        },
        err);
  }
  if (*traj) {
    return dispatch(
        [&] {
          const auto table = run_trajectory_study(traj_args.study);
          emit(traj_args.out, out,
               [&](std::ostream& s) { s << format_trajectory_table(table, traj_args.json); });
          return kExitOk;
        },
        err);
  }
  if (*corpus) {
    return dispatch(
        [&] {
          const auto items = generate_disk_corpus(corpus_args.corpus);
          out << write_corpus(corpus_args.out, items).string() << '\n';
          return kExitOk;
        },
        err);
  }
  return dispatch(
      [&] {
        write_scene(scene_args.out, make_scene(scene_args.scene));
        return kExitOk;
      },
      err);
}

}  // namespace balltrack::cli
