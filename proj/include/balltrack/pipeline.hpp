#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "balltrack/detect.hpp"
#include "balltrack/fusion.hpp"
#include "balltrack/geometry.hpp"

namespace balltrack {

/// One line of a detection stream:
///   {"camera_id":0,"frame":12,"u":..,"v":..}
///   {"camera_id":0,"frame":12,"none":true}
///   {"camera_id":0,"frame":12,"error":"..."}
/// An optional "t" (seconds) may accompany any of them.
struct DetectionRecord {
  int camera_id = 0;
  long long frame = 0;
  std::optional<double> t;
  std::optional<Pixel> pixel;
  std::optional<std::string> error;
};

std::string format_detection(const DetectionRecord& record);
/// nullopt for malformed lines.
std::optional<DetectionRecord> parse_detection(const std::string& line);

struct ManifestEntry {
  int camera_id = 0;
  long long frame = 0;
  std::filesystem::path image;
};

/// Text manifest, one `camera_id frame path` per line; relative paths resolve
/// against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

/// Scans root/cam<id>/<frame>.ppm; entries sorted by frame, then camera.
std::vector<ManifestEntry> scan_camera_dirs(const std::filesystem::path& root);

/// Detects the ball in every entry and writes one record per entry, in
/// entry order. Unreadable images yield error records.
void run_detection(const std::vector<ManifestEntry>& entries, const ConvUnit& unit,
                   const DetectorConfig& cfg, std::ostream& out);

struct TrackRecord {
  long long frame = 0;
  double t = 0.0;
  FusionResult result;
  std::optional<double> latency_ms;
};

std::string format_track(const TrackRecord& record);

struct TrackerOptions {
  double fps = 200.0;            // frame tag -> time when records carry no "t"
  bool report_latency = false;   // wall-clock latency makes output non-reproducible
};

struct TrackerCounters {
  long long records_in = 0;
  long long records_used = 0;
  long long records_skipped = 0;  // malformed, error, duplicate or unknown camera
  long long records_late = 0;
  long long frames_out = 0;
};

/// Groups detection records by frame and fuses each group. A group closes
/// once every calibrated camera has reported, or when a record two or more
/// frames newer arrives. Output is in increasing frame order.
class Tracker {
 public:
  Tracker(std::vector<CameraModel> cameras, FusionConfig fusion, TrackerOptions options = {});

  /// Feeds one raw stream line; returns records ready for emission.
  std::vector<TrackRecord> push_line(const std::string& line);
  std::vector<TrackRecord> push(const DetectionRecord& record);
  /// Closes all pending groups.
  std::vector<TrackRecord> finish();

  const TrackerCounters& counters() const { return counters_; }
  std::string summary() const;

 private:
  struct Group {
    std::map<int, std::optional<Pixel>> members;  // camera id -> pixel or none
    std::optional<double> t;
    bool closed = false;
    std::chrono::steady_clock::time_point closed_at;
  };

  std::vector<TrackRecord> drain();
  TrackRecord fuse_group(long long frame, const Group& group) const;

  std::vector<CameraModel> cameras_;
  FusionConfig fusion_;
  TrackerOptions options_;
  std::map<long long, Group> pending_;
  std::optional<long long> last_emitted_;
  std::optional<long long> max_frame_seen_;
  TrackerCounters counters_;
};

}  // namespace balltrack
