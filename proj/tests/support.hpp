#pragma once

// Shared fixtures and small helpers for the unit tests.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "peelfield/mesh.hpp"
#include "peelfield/sphere.hpp"

namespace peelfield {

inline TetrahedralMesh unit_tet_mesh() {
  return TetrahedralMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                         {{0, 1, 2, 3}}, {1}, {{1, 1.0}});
}

// Two elements sharing face {1,2,3}; apexes 0 and 4.
inline TetrahedralMesh two_tet_mesh() {
  return TetrahedralMesh(
      {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}},
      {{0, 1, 2, 3}, {1, 2, 3, 4}}, {1, 2}, {{1, 1.0}, {2, 0.5}});
}

// Coarse three-shell ball shared by the mesh/peel/fem tests; built once.
inline const TetrahedralMesh& small_sphere_mesh() {
  static const TetrahedralMesh mesh = [] {
    ShellSpec spec;
    spec.radii_mm = {87.0, 92.0, 100.0};
    spec.conductivities = {1.0, 0.0125, 1.0};
    return generate_sphere_mesh(spec, 25.0);
  }();
  return mesh;
}

// Homogeneous ball, a bit finer; used by forward-accuracy tests.
inline const TetrahedralMesh& homogeneous_sphere_mesh() {
  static const TetrahedralMesh mesh = [] {
    ShellSpec spec;
    spec.radii_mm = {87.0, 92.0, 100.0};
    spec.conductivities = {1.0, 1.0, 1.0};
    return generate_sphere_mesh(spec, 14.0);
  }();
  return mesh;
}

inline std::string temp_path(const std::string& name) {
  return std::string("/tmp/peelfield_test_") + name;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Deterministic xorshift for test inputs; intentionally separate from the
// library's RNG so generator bugs cannot hide themselves.
class RandomSequence {
 public:
  explicit RandomSequence(std::uint64_t seed) : state_(seed * 2685821657736338717ULL + 1) {}

  std::uint64_t next() {
    state_ ^= state_ << 13;
    state_ ^= state_ >> 7;
    state_ ^= state_ << 17;
    return state_;
  }
  double unit() {  // in [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
  int index(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

 private:
  std::uint64_t state_;
};

}  // namespace peelfield

using peelfield::homogeneous_sphere_mesh;
using peelfield::RandomSequence;
using peelfield::small_sphere_mesh;
using peelfield::temp_path;
using peelfield::two_tet_mesh;
using peelfield::unit_tet_mesh;
using peelfield::write_file;
