#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "balltrack/detect.hpp"
#include "json.hpp"

namespace balltrack {

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      if (!token.empty()) break;
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader h;
  h.magic = next_token(in);
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed netpbm header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 255) {
    throw FormatError(path.string() + ": unsupported netpbm dimensions or maxval");
  }
  return h;
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t size,
                                        const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return bytes;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ColorImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
  const auto bytes = read_payload(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  std::vector<double> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / double(h.maxval);
  return ColorImage(h.width, h.height, std::move(data));
}

void write_ppm(const std::filesystem::path& path, const ColorImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write image " + path.string());
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(image.data().size());
  for (double v : image.data()) bytes.push_back(to_byte(v));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ProbabilityImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const auto bytes = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
  std::vector<double> values(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) values[i] = bytes[i] / double(h.maxval);
  return ProbabilityImage(h.width, h.height, std::move(values));
}

void write_pgm(const std::filesystem::path& path, const ProbabilityImage& prob) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write image " + path.string());
  out << "P5\n" << prob.width() << ' ' << prob.height() << "\n255\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(prob.values().size());
  for (double v : prob.values()) bytes.push_back(to_byte(v));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ConvUnit load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("weights") || !doc["weights"].is_array() ||
      doc["weights"].size() != kFilterWeights || !doc.contains("bias") ||
      !doc["bias"].is_number()) {
    throw FormatError(path.string() + ": model needs 'weights' (75 numbers) and 'bias'");
  }
  ConvUnit unit;
  for (int i = 0; i < kFilterWeights; ++i) {
    if (!doc["weights"][i].is_number()) {
      throw FormatError(path.string() + ": weights[" + std::to_string(i) + "] is not a number");
    }
    unit.weights[i] = doc["weights"][i].get<double>();
  }
  unit.bias = doc["bias"].get<double>();
  return unit;
}

void save_model(const std::filesystem::path& path, const ConvUnit& unit) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model " + path.string());
  nlohmann::json doc{{"weights", unit.weights}, {"bias", unit.bias}};
  out << doc.dump(2) << "\n";
}

std::vector<LabelRecord> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label file " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<LabelRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string image;
    if (!(fields >> image) || image.front() == '#') continue;
    LabelRecord record;
    record.image = std::filesystem::path(image).is_absolute() ? std::filesystem::path(image) : base / image;
    std::vector<int> box;
    int value;
    while (fields >> value) box.push_back(value);
    if (!fields.eof() || (box.size() != 0 && box.size() != 4)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected `path [min_row min_col max_row max_col]`");
    }
    if (box.size() == 4) {
      if (box[2] < box[0] || box[3] < box[1]) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": inverted bbox");
      }
      record.bbox = BBox{box[0], box[1], box[2], box[3]};
    }
    records.push_back(std::move(record));
  }
  return records;
}

void save_labels(const std::filesystem::path& path, std::span<const LabelRecord> records) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write label file " + path.string());
  const std::filesystem::path base = path.parent_path();
  for (const LabelRecord& r : records) {
    out << std::filesystem::relative(r.image, base.empty() ? "." : base).generic_string();
    if (r.bbox) {
      out << ' ' << r.bbox->min_row << ' ' << r.bbox->min_col << ' ' << r.bbox->max_row << ' '
          << r.bbox->max_col;
    }
    out << '\n';
  }
}

}  // namespace balltrack
