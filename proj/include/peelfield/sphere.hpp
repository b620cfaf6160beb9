#pragma once

#include <vector>

#include "peelfield/mesh.hpp"

namespace peelfield {

// Concentric-shell geometry: outer radius and conductivity per shell,
// innermost first.  Shell k occupies radii (radii_mm[k-1], radii_mm[k]].
struct ShellSpec {
  std::vector<double> radii_mm;        // strictly increasing, > 0
  std::vector<double> conductivities;  // S/m, > 0

  int shell_count() const { return static_cast<int>(radii_mm.size()); }
  double outer_radius() const { return radii_mm.back(); }
  void validate() const;  // throws ConfigError
};

// Conforming tetrahedral mesh of the outer ball built from a body-centered
// cubic lattice clipped to the sphere: elements whose centroid lies in the
// ball are kept, with corners beyond the outer radius pulled radially onto
// it.  Elements are labeled 1..K by the innermost shell whose radius reaches
// their centroid.  Remaining boundary nodes are snapped onto the outer
// radius and nodes near internal interfaces onto the interface radius (with
// reverts protecting element quality) so shell boundaries are spherical
// rather than staircased.  No node ever lies outside the outer radius.
// Deterministic for fixed inputs.
TetrahedralMesh generate_sphere_mesh(const ShellSpec& spec,
                                     double target_edge_mm);

// Near-uniform montage of n points on a sphere (Fibonacci spiral).
std::vector<Vec3> fibonacci_montage(double radius_mm, int n);

// Latitude-ring montage: n_azimuth equispaced points on each z = r*cos_theta
// ring.  Keeps sensors away from chosen latitudes (e.g. the equator, where
// a central radial dipole's potential crosses zero).
std::vector<Vec3> ring_montage(double radius_mm,
                               const std::vector<double>& cos_thetas,
                               int n_azimuth);

}  // namespace peelfield
