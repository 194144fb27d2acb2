#include "balltrack/calibration.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace balltrack {

using nlohmann::json;

namespace {

std::string camera_label(const json& entry, std::size_t index) {
  if (entry.is_object() && entry.contains("id") && entry["id"].is_number_integer()) {
    return "camera " + std::to_string(entry["id"].get<long long>());
  }
  return "camera at index " + std::to_string(index) + " (missing id)";
}

}  // namespace

std::vector<CameraModel> parse_calibration(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CalibrationError(std::string("calibration is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("cameras") || !doc["cameras"].is_array()) {
    throw CalibrationError("calibration must be an object with a 'cameras' array");
  }
  std::vector<CameraModel> cameras;
  std::set<int> seen;
  const json& list = doc["cameras"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& entry = list[i];
    const std::string label = camera_label(entry, i);
    if (!entry.is_object()) throw CalibrationError(label + ": entry is not an object");
    for (const char* key : {"id", "width", "height"}) {
      if (!entry.contains(key) || !entry[key].is_number_integer()) {
        throw CalibrationError(label + ": field '" + key + "' must be an integer");
      }
    }
    if (!entry.contains("P") || !entry["P"].is_array() || entry["P"].size() != 12) {
      throw CalibrationError(label + ": field 'P' must be an array of 12 numbers");
    }
    Mat34 P;
    for (int k = 0; k < 12; ++k) {
      const json& value = entry["P"][k];
      if (!value.is_number()) {
        throw CalibrationError(label + ": P[" + std::to_string(k) + "] is not a number");
      }
      P(k / 4, k % 4) = value.get<double>();
    }
    const int id = entry["id"].get<int>();
    if (!seen.insert(id).second) throw CalibrationError(label + ": duplicate id");
    try {
      cameras.emplace_back(id, P, entry["width"].get<int>(), entry["height"].get<int>());
    } catch (const std::invalid_argument& e) {
      throw CalibrationError(e.what());
    }
  }
  if (cameras.empty()) throw CalibrationError("calibration lists no cameras");
  return cameras;
}

std::vector<CameraModel> load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("cannot open calibration file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_calibration(buffer.str());
}

std::string format_calibration(const std::vector<CameraModel>& cameras) {
  json list = json::array();
  for (const CameraModel& cam : cameras) {
    json P = json::array();
    for (int k = 0; k < 12; ++k) P.push_back(cam.P()(k / 4, k % 4));
    list.push_back({{"id", cam.id()},
                    {"width", cam.width()},
                    {"height", cam.height()},
                    {"P", P}});
  }
  return json{{"cameras", list}}.dump(2) + "\n";
}

void save_calibration(const std::filesystem::path& path,
                      const std::vector<CameraModel>& cameras) {
  std::ofstream out(path);
  if (!out) throw CalibrationError("cannot write calibration file " + path.string());
  out << format_calibration(cameras);
}

}  // namespace balltrack
