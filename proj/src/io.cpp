#include "peelfield/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "peelfield/errors.hpp"

namespace peelfield {

namespace {

using json = nlohmann::json;

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
  throw ConfigError(what + ": " + path);
}

void check_little_endian() {
  const std::uint32_t probe = 1;
  unsigned char first;
  std::memcpy(&first, &probe, 1);
  if (first != 1)
    throw NumericalError("lead-field binary format requires a little-endian host");
}

json json_vec3_list(const std::vector<Vec3>& points) {
  json arr = json::array();
  for (const Vec3& p : points) arr.push_back({p.x(), p.y(), p.z()});
  return arr;
}

void dump_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) io_fail("cannot open for writing", path);
  out << doc.dump(2) << '\n';
  if (!out) io_fail("write failed", path);
}

}  // namespace

void save_leadfield(const std::string& path, const Eigen::MatrixXd& L) {
  check_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail("cannot open for writing", path);
  const char magic[4] = {'L', 'F', 'L', 'D'};
  const std::uint32_t rows = static_cast<std::uint32_t>(L.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(L.cols());
  const std::uint32_t reserved = 0;
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  std::vector<double> row(L.cols());
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    for (Eigen::Index c = 0; c < L.cols(); ++c) row[c] = L(r, c);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) io_fail("write failed", path);
}

Eigen::MatrixXd load_leadfield(const std::string& path) {
  check_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open", path);
  char magic[4];
  std::uint32_t rows = 0, cols = 0, reserved = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  in.read(reinterpret_cast<char*>(&reserved), 4);
  if (!in || std::memcmp(magic, "LFLD", 4) != 0)
    io_fail("not a lead-field binary (bad header)", path);
  Eigen::MatrixXd L(rows, cols);
  std::vector<double> row(cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(cols * sizeof(double)));
    if (!in) io_fail("truncated lead-field binary", path);
    for (std::uint32_t c = 0; c < cols; ++c) L(r, c) = row[c];
  }
  return L;
}

SensorFile load_sensor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("cannot open", path);
  std::string line;
  int line_no = 0;
  SensorFile sensors;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    if (!header_seen) {
      std::string word, version;
      if (!(ss >> word)) continue;  // blank/comment before header
      ss >> version;
      if (word != "sensors" || version != "v1")
        io_fail("expected 'sensors v1' header", path);
      header_seen = true;
      continue;
    }
    std::string label;
    double x, y, z;
    if (!(ss >> label)) continue;
    if (!(ss >> x >> y >> z)) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "bad sensor line %d in %s", line_no,
                    path.c_str());
      throw ConfigError(buf);
    }
    sensors.labels.push_back(label);
    sensors.positions.emplace_back(x, y, z);
  }
  if (!header_seen) io_fail("expected 'sensors v1' header", path);
  if (sensors.labels.empty()) io_fail("sensor file lists no sensors", path);
  return sensors;
}

void save_sensor_file(const std::string& path, const SensorFile& sensors) {
  std::ofstream out(path);
  if (!out) io_fail("cannot open for writing", path);
  out << "sensors v1\n";
  char buf[160];
  for (std::size_t i = 0; i < sensors.labels.size(); ++i) {
    const Vec3& p = sensors.positions[i];
    std::snprintf(buf, sizeof(buf), "%s %.17g %.17g %.17g\n",
                  sensors.labels[i].c_str(), p.x(), p.y(), p.z());
    out << buf;
  }
  if (!out) io_fail("write failed", path);
}

void save_dmat(const std::string& path, const Eigen::SparseMatrix<double>& D) {
  std::ofstream out(path);
  if (!out) io_fail("cannot open for writing", path);
  out << "dmat v1\n"
      << D.rows() << ' ' << D.cols() << ' ' << D.nonZeros() << '\n';
  char buf[96];
  for (int k = 0; k < D.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n",
                    static_cast<long>(it.row()), static_cast<long>(it.col()),
                    it.value());
      out << buf;
    }
  }
  if (!out) io_fail("write failed", path);
}

Eigen::SparseMatrix<double> load_dmat(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("cannot open", path);
  std::string word, version;
  if (!(in >> word >> version) || word != "dmat" || version != "v1")
    io_fail("expected 'dmat v1' header", path);
  long rows, cols, nnz;
  if (!(in >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
    io_fail("bad dmat dimensions", path);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (long t = 0; t < nnz; ++t) {
    long i, j;
    double v;
    if (!(in >> i >> j >> v)) io_fail("truncated dmat triplets", path);
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      io_fail("dmat triplet outside declared shape", path);
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  Eigen::SparseMatrix<double> D(rows, cols);
  D.setFromTriplets(triplets.begin(), triplets.end());
  D.makeCompressed();
  return D;
}

void save_peel_json(const std::string& path, const PeelResult& result,
                    double depth_mm, double effective_depth_mm) {
  json doc;
  doc["depth_mm"] = depth_mm;
  doc["effective_depth_mm"] = effective_depth_mm;
  doc["kept_count"] = result.kept_tetra.size();
  doc["removed_count"] = result.removed_tetra.size();
  doc["surface_node_count"] = result.surface_nodes.size();
  doc["kept_tetra"] = result.kept_tetra;
  doc["removed_tetra"] = result.removed_tetra;
  doc["surface_nodes"] = result.surface_nodes;
  dump_json(path, doc);
}

void save_source_space_json(const std::string& path,
                            const SourceSpace& sources) {
  json doc;
  doc["count"] = sources.count();
  doc["positions_mm"] = json_vec3_list(sources.positions);
  doc["host_tetra"] = sources.host_tetra;
  dump_json(path, doc);
}

SourceSpace load_source_space_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail("cannot open", path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    io_fail(std::string("bad source-space JSON (") + e.what() + ")", path);
  }
  SourceSpace sources;
  try {
    for (const auto& p : doc.at("positions_mm"))
      sources.positions.emplace_back(p.at(0).get<double>(),
                                     p.at(1).get<double>(),
                                     p.at(2).get<double>());
    sources.host_tetra = doc.at("host_tetra").get<std::vector<int>>();
  } catch (const json::exception& e) {
    io_fail(std::string("bad source-space JSON (") + e.what() + ")", path);
  }
  if (sources.positions.size() != sources.host_tetra.size())
    io_fail("source-space JSON positions/hosts length mismatch", path);
  return sources;
}

void save_reconstruction_json(const std::string& path,
                              const Reconstruction& recon) {
  json doc;
  doc["method"] = recon.method;
  doc["parameter"] = recon.parameter;
  doc["argmax"] = recon.argmax;
  doc["scores"] = std::vector<double>(recon.scores.data(),
                                      recon.scores.data() + recon.scores.size());
  if (recon.argmax >= 0 &&
      recon.argmax < static_cast<int>(recon.moments.size())) {
    const Eigen::Vector3d& m = recon.moments[recon.argmax];
    doc["argmax_moment"] = {m.x(), m.y(), m.z()};
  }
  dump_json(path, doc);
}

std::string format_double(double value) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  return buf;
}

void write_text_file(const std::string& path,
                     const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) io_fail("cannot open for writing", path);
  for (const std::string& line : lines) out << line << '\n';
  if (!out) io_fail("write failed", path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot open", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
  return parse_text(read_text_file(path), path);
}

ConfigMap ConfigMap::parse_text(const std::string& text,
                                const std::string& origin) {
  ConfigMap cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "%s line %d: expected 'key: value'", origin.c_str(),
                    line_no);
      throw ConfigError(buf);
    }
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key.empty()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s line %d: empty key", origin.c_str(),
                    line_no);
      throw ConfigError(buf);
    }
    if (cfg.entries_.count(key)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s line %d: duplicate key '%s'",
                    origin.c_str(), line_no, key.c_str());
      throw ConfigError(buf);
    }
    cfg.entries_[key] = value;
  }
  if (cfg.get_int("config_version") != 1)
    throw ConfigError(origin + ": unsupported config_version (expected 1)");
  return cfg;
}

bool ConfigMap::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

const std::string& ConfigMap::raw(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw ConfigError(origin_ + ": missing required key '" + key + "'");
  touched_[key] = true;
  return it->second;
}

std::string ConfigMap::get_string(const std::string& key) const {
  return raw(key);
}

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

int ConfigMap::get_int(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' is not an integer: " + v);
  }
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double ConfigMap::get_double(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "' is not a number: " + v);
  }
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = raw(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(origin_ + ": key '" + key + "' is not a boolean: " + v);
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& part : split_commas(raw(key))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key +
                        "' has a non-numeric entry: " + part);
    }
  }
  if (out.empty())
    throw ConfigError(origin_ + ": key '" + key + "' lists no values");
  return out;
}

std::vector<int> ConfigMap::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& part : split_commas(raw(key))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key +
                        "' has a non-integer entry: " + part);
    }
  }
  if (out.empty())
    throw ConfigError(origin_ + ": key '" + key + "' lists no values");
  return out;
}

std::vector<std::string> ConfigMap::get_string_list(
    const std::string& key) const {
  std::vector<std::string> out = split_commas(raw(key));
  if (out.empty())
    throw ConfigError(origin_ + ": key '" + key + "' lists no values");
  return out;
}

std::vector<std::string> ConfigMap::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : entries_)
    if (!touched_.count(key)) out.push_back(key);
  return out;
}

}  // namespace peelfield
