#pragma once

#include <set>
#include <vector>

#include "peelfield/mesh.hpp"

namespace peelfield {

struct PeelConfig {
  double depth_mm = 0.0;               // d_p >= 0
  std::set<int> active_compartments;   // non-empty
};

// Partition of the active-compartment elements into source-hosting (kept)
// and disqualified (removed) sets.  kept and removed are disjoint, sorted,
// and together cover every active element.
struct PeelResult {
  std::vector<int> kept_tetra;
  std::vector<int> removed_tetra;
  std::vector<int> surface_nodes;  // active-surface node indices, sorted
};

// Source-position peeling: a node qualifies iff it is not an active-surface
// node and its minimum distance to the active-surface nodes is >= depth_mm;
// an element is kept iff all four nodes qualify.  Surface nodes are excluded
// outright even at depth 0, so the outermost element layer is always peeled.
// An empty kept set is a legitimate outcome, not an error.
PeelResult peel(const TetrahedralMesh& mesh, const PeelConfig& config);

struct EffectiveDepth {
  double value_mm = 0.0;  // +infinity when no element survived
  bool empty = false;
};

// Realized standoff: the minimum over kept-element nodes of the distance to
// the active surface.  Diagnostic for how much deeper than depth_mm the
// surviving sources actually sit.
EffectiveDepth effective_depth(const TetrahedralMesh& mesh,
                               const PeelResult& result);

// Exact min-distance queries against a fixed point set through a uniform
// grid with expanding-ring search.  Distance arithmetic is identical to a
// direct scan, so results match an exhaustive oracle bit for bit.
class PointGrid {
 public:
  PointGrid(const std::vector<Vec3>& points, double cell_size);

  double min_distance(const Vec3& query) const;

 private:
  std::vector<Vec3> points_;
  double cell_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<int> cell_start_;  // CSR layout over cells
  std::vector<int> cell_items_;
};

}  // namespace peelfield
