#pragma once

#include "peelfield/fem.hpp"
#include "peelfield/sources.hpp"
#include "peelfield/sphere.hpp"

namespace peelfield {

// Surface potential of a point dipole inside a concentric-shell conductor,
// from the classical Legendre-series solution.  Per degree n the coefficient
// pair of a_n r^n + b_n r^-(n+1) is propagated across shell interfaces by
// the 2x2 continuity relations (u and sigma du/dr continuous), with a
// Neumann condition at the outer surface.  The per-degree surface gains
// depend only on the geometry and are precomputed once.
class AnalyticSphereModel {
 public:
  static constexpr int kMaxDegree = 400;
  static constexpr double kTermRtol = 1e-12;

  explicit AnalyticSphereModel(const ShellSpec& spec);

  // Potential at a point on the outer surface (the sensor direction is what
  // matters; the point is used radially) for a dipole at `source` strictly
  // inside the innermost shell.  Units: with positions in mm, conductivities
  // in S/m and a unit moment, potentials carry a fixed overall scale shared
  // with the FEM pipeline, so relative comparisons need no conversion.
  double potential(const Vec3& source, const Vec3& moment,
                   const Vec3& sensor) const;

  // The (radial, tangential) potential factors A, B at a sensor: the
  // potential for moment p is A*(p . e_r) + B*(p . e_t) with e_r the source
  // radial direction and e_t the in-plane tangential toward the sensor.
  // Exposed so a whole Cartesian triplet costs one series evaluation.
  void factors(const Vec3& source, const Vec3& sensor, double* radial,
               double* tangential, Vec3* e_r, Vec3* e_t) const;

 private:
  ShellSpec spec_;
  std::vector<double> gain_;  // gain_[n-1] = g_n for degree n
};

// 3-shell analytic lead field at the given sensors and source positions,
// Cartesian triplet columns, each mean-subtracted across sensors.  Sensors
// are projected radially onto the outer surface; a projection beyond 1 mm
// prints a warning to stderr.
LeadField analytic_sphere_leadfield(const ShellSpec& spec,
                                    const SensorArray& sensors,
                                    const SourceSpace& sources);

}  // namespace peelfield
