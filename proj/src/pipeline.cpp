#include "balltrack/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace balltrack {

using nlohmann::json;

std::string format_detection(const DetectionRecord& record) {
  json doc{{"camera_id", record.camera_id}, {"frame", record.frame}};
  if (record.t) doc["t"] = *record.t;
  if (record.error) {
    doc["error"] = *record.error;
  } else if (record.pixel) {
    doc["u"] = record.pixel->u;
    doc["v"] = record.pixel->v;
  } else {
    doc["none"] = true;
  }
  return doc.dump();
}

std::optional<DetectionRecord> parse_detection(const std::string& line) {
  const json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!doc.is_object()) return std::nullopt;
  if (!doc.contains("camera_id") || !doc["camera_id"].is_number_integer()) return std::nullopt;
  if (!doc.contains("frame") || !doc["frame"].is_number_integer()) return std::nullopt;
  DetectionRecord record;
  record.camera_id = doc["camera_id"].get<int>();
  record.frame = doc["frame"].get<long long>();
  if (doc.contains("t")) {
    if (!doc["t"].is_number()) return std::nullopt;
    record.t = doc["t"].get<double>();
  }
  if (doc.contains("error")) {
    record.error = doc["error"].is_string() ? doc["error"].get<std::string>() : doc["error"].dump();
    return record;
  }
  if (doc.contains("none") && doc["none"] == true) return record;
  if (doc.contains("u") && doc.contains("v") && doc["u"].is_number() && doc["v"].is_number()) {
    record.pixel = Pixel{doc["u"].get<double>(), doc["v"].get<double>()};
    return record;
  }
  return std::nullopt;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    ManifestEntry entry;
    std::string image;
    if (!(fields >> entry.camera_id)) {
      std::istringstream probe(line);
      std::string first;
      if (!(probe >> first) || first.front() == '#') continue;
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected `camera_id frame path`");
    }
    if (!(fields >> entry.frame >> image)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected `camera_id frame path`");
    }
    entry.image = std::filesystem::path(image).is_absolute() ? std::filesystem::path(image) : base / image;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<ManifestEntry> scan_camera_dirs(const std::filesystem::path& root) {
  std::vector<ManifestEntry> entries;
  for (const auto& dir : std::filesystem::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string name = dir.path().filename().string();
    if (name.rfind("cam", 0) != 0) continue;
    int camera_id = 0;
    try {
      std::size_t used = 0;
      camera_id = std::stoi(name.substr(3), &used);
      if (used != name.size() - 3) continue;
    } catch (const std::exception&) {
      continue;
    }
    for (const auto& file : std::filesystem::directory_iterator(dir.path())) {
      if (file.path().extension() != ".ppm") continue;
      try {
        std::size_t used = 0;
        const std::string stem = file.path().stem().string();
        const long long frame = std::stoll(stem, &used);
        if (used != stem.size()) continue;
        entries.push_back({camera_id, frame, file.path()});
      } catch (const std::exception&) {
        continue;
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.camera_id < b.camera_id;
  });
  return entries;
}

void run_detection(const std::vector<ManifestEntry>& entries, const ConvUnit& unit,
                   const DetectorConfig& cfg, std::ostream& out) {
  for (const ManifestEntry& entry : entries) {
    DetectionRecord record;
    record.camera_id = entry.camera_id;
    record.frame = entry.frame;
    try {
      record.pixel = detect(read_ppm(entry.image), unit, cfg);
    } catch (const std::exception& e) {
      record.error = e.what();
    }
    out << format_detection(record) << '\n';
  }
}

std::string format_track(const TrackRecord& record) {
  json doc{{"frame", record.frame}, {"t", record.t}};
  if (record.result.ok()) {
    const FusionSuccess& s = record.result.success();
    doc["status"] = "ok";
    doc["position"] = {s.position.x(), s.position.y(), s.position.z()};
    doc["inliers"] = s.inlier_ids;
    doc["residuals"] = s.residuals;
  } else {
    doc["status"] = "failure";
    doc["reason"] = std::string(to_string(record.result.failure().reason));
  }
  if (record.latency_ms) doc["latency_ms"] = *record.latency_ms;
  return doc.dump();
}

Tracker::Tracker(std::vector<CameraModel> cameras, FusionConfig fusion, TrackerOptions options)
    : cameras_(std::move(cameras)), fusion_(fusion), options_(options) {
  fusion_.validate();
  if (!(options_.fps > 0.0)) throw std::invalid_argument("fps must be positive");
}

std::vector<TrackRecord> Tracker::push_line(const std::string& line) {
  if (line.find_first_not_of(" \t\r") == std::string::npos) return {};
  const auto record = parse_detection(line);
  if (!record) {
    ++counters_.records_in;
    ++counters_.records_skipped;
    return {};
  }
  return push(*record);
}

std::vector<TrackRecord> Tracker::push(const DetectionRecord& record) {
  ++counters_.records_in;
  const bool known = std::any_of(cameras_.begin(), cameras_.end(), [&](const CameraModel& c) {
    return c.id() == record.camera_id;
  });
  if (!known || record.error) {
    ++counters_.records_skipped;
    return {};
  }
  const bool behind_window = max_frame_seen_ && record.frame <= *max_frame_seen_ - 2;
  const bool already_emitted = last_emitted_ && record.frame <= *last_emitted_;
  if (behind_window || already_emitted) {
    ++counters_.records_late;
    return {};
  }

  Group& group = pending_[record.frame];
  if (group.closed) {
    ++counters_.records_late;
    return {};
  }
  if (group.members.count(record.camera_id)) {
    ++counters_.records_skipped;
    return {};
  }
  group.members.emplace(record.camera_id, record.pixel);
  if (!group.t && record.t) group.t = record.t;
  ++counters_.records_used;

  const auto now = std::chrono::steady_clock::now();
  if (group.members.size() == cameras_.size()) {
    group.closed = true;
    group.closed_at = now;
  }
  if (!max_frame_seen_ || record.frame > *max_frame_seen_) max_frame_seen_ = record.frame;
  for (auto& [frame, pending] : pending_) {
    if (frame > *max_frame_seen_ - 2) break;
    if (!pending.closed) {
      pending.closed = true;
      pending.closed_at = now;
    }
  }
  return drain();
}

std::vector<TrackRecord> Tracker::finish() {
  const auto now = std::chrono::steady_clock::now();
  for (auto& [frame, group] : pending_) {
    if (!group.closed) {
      group.closed = true;
      group.closed_at = now;
    }
  }
  return drain();
}

std::vector<TrackRecord> Tracker::drain() {
  std::vector<TrackRecord> out;
  while (!pending_.empty() && pending_.begin()->second.closed) {
    const auto node = pending_.extract(pending_.begin());
    TrackRecord record = fuse_group(node.key(), node.mapped());
    if (options_.report_latency) {
      record.latency_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - node.mapped().closed_at)
                              .count();
    }
    last_emitted_ = node.key();
    ++counters_.frames_out;
    out.push_back(std::move(record));
  }
  return out;
}

TrackRecord Tracker::fuse_group(long long frame, const Group& group) const {
  std::vector<View> views;
  for (const auto& [camera_id, pixel] : group.members) {
    if (!pixel) continue;
    const auto it = std::find_if(cameras_.begin(), cameras_.end(),
                                 [id = camera_id](const CameraModel& c) { return c.id() == id; });
    views.push_back({*pixel, &*it});
  }
  TrackRecord record;
  record.frame = frame;
  record.t = group.t ? *group.t : static_cast<double>(frame) / options_.fps;
  record.result = fuse(views, fusion_);
  return record;
}

std::string Tracker::summary() const {
  std::ostringstream out;
  out << "records_in=" << counters_.records_in << " records_used=" << counters_.records_used
      << " records_skipped=" << counters_.records_skipped
      << " records_late=" << counters_.records_late << " frames_out=" << counters_.frames_out;
  return out.str();
}

}  // namespace balltrack
