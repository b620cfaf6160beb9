#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <map>
#include <string>
#include <vector>

#include "peelfield/fem.hpp"
#include "peelfield/inverse.hpp"
#include "peelfield/peel.hpp"
#include "peelfield/sources.hpp"

namespace peelfield {

// --- lead field: flat binary, 16-byte header ("LFLD", u32 rows, u32 cols,
// u32 reserved), then row-major little-endian f64 ---
void save_leadfield(const std::string& path, const Eigen::MatrixXd& L);
Eigen::MatrixXd load_leadfield(const std::string& path);

// --- sensor list: "sensors v1" header, then "label x y z" lines (mm) ---
struct SensorFile {
  std::vector<std::string> labels;
  std::vector<Vec3> positions;
};
SensorFile load_sensor_file(const std::string& path);
void save_sensor_file(const std::string& path, const SensorFile& sensors);

// --- interpolation matrix: "dmat v1" header, "rows cols nnz" line, then
// "i j value" triplets in column-major order ---
void save_dmat(const std::string& path, const Eigen::SparseMatrix<double>& D);
Eigen::SparseMatrix<double> load_dmat(const std::string& path);

// --- JSON reports ---
void save_peel_json(const std::string& path, const PeelResult& result,
                    double depth_mm, double effective_depth_mm);
void save_source_space_json(const std::string& path,
                            const SourceSpace& sources);
SourceSpace load_source_space_json(const std::string& path);
void save_reconstruction_json(const std::string& path,
                              const Reconstruction& recon);

// --- text helpers shared by CSV/manifest writers ---

// Stable 10-significant-digit decimal for CSV cells; identical input bits
// always produce the identical string.
std::string format_double(double value);
// Writes pre-formatted lines followed by '\n' each; throws on I/O failure.
void write_text_file(const std::string& path,
                     const std::vector<std::string>& lines);
std::string read_text_file(const std::string& path);

// --- experiment config: line-oriented "key: value" text, '#' comments,
// mandatory "config_version: 1" ---
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_text(const std::string& text,
                              const std::string& origin);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Keys never queried; catches misspelled config entries.
  std::vector<std::string> unused_keys() const;
  const std::map<std::string, std::string>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::string> entries_;
  mutable std::map<std::string, bool> touched_;
  std::string origin_;

  const std::string& raw(const std::string& key) const;
};

}  // namespace peelfield
