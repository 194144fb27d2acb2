#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "balltrack/geometry.hpp"

namespace balltrack {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calibration documents are JSON:
//   {"cameras": [{"id": 0, "width": 640, "height": 480, "P": [12 numbers]}]}
// P is row-major.
std::vector<CameraModel> parse_calibration(const std::string& text);
std::vector<CameraModel> load_calibration(const std::filesystem::path& path);
std::string format_calibration(const std::vector<CameraModel>& cameras);
void save_calibration(const std::filesystem::path& path,
                      const std::vector<CameraModel>& cameras);

}  // namespace balltrack
