#pragma once

#include <Eigen/Sparse>

#include <vector>

#include "peelfield/mesh.hpp"
#include "peelfield/peel.hpp"

namespace peelfield {

// A node-pair source: either an element edge (edgewise) or the two vertices
// opposite a face shared by two kept elements (face-intersecting).
struct HdivDipole {
  enum class Kind { kEdgewise, kFaceIntersecting };

  int node_a = -1;  // negative end (smaller node index)
  int node_b = -1;  // positive end
  Kind kind = Kind::kEdgewise;
  Vec3 direction = Vec3::Zero();  // unit vector from node_a to node_b
  Vec3 position = Vec3::Zero();   // pair midpoint, mm
  double length_mm = 0.0;
  int host_tetra = -1;
};

// Dipole positions placed into the kept elements; orientation policy is
// Cartesian triplets (three unit moments per position).
struct SourceSpace {
  std::vector<Vec3> positions;   // mm
  std::vector<int> host_tetra;   // each a member of the kept set

  int count() const { return static_cast<int>(positions.size()); }
};

// nodes x (3 * n_sources); column = monopole loads realizing one Cartesian
// unit moment at one source.  Columns sum to zero and touch <= 60 nodes.
using InterpolationMatrix = Eigen::SparseMatrix<double>;

// Cell centers of a cubic lattice restricted to the kept elements; the
// spacing is bisected until the achieved count is within 2% of target_count
// (or 30 iterations pass, keeping the best spacing seen).  Deterministic.
SourceSpace place_sources(const TetrahedralMesh& mesh, const PeelResult& peel,
                          int target_count);

// All distinct node-pair dipoles of the kept set: six edges per kept element
// plus one opposite-vertex pair per face interior to the kept set.
// Deduplicated by node pair; deterministic order (edges first, in kept-
// element order, then face-intersecting pairs).
std::vector<HdivDipole> enumerate_hdiv_dipoles(const TetrahedralMesh& mesh,
                                               const std::vector<int>& kept);

struct PboOptions {
  int max_candidates = 30;  // nearest-to-source cap on the weighted set
};

// Position-based optimization: for each source x and Cartesian moment e_c,
// per-dipole moment weights minimize sum w_j^2 ||pos_j - x||^2 subject to
// exact moment reproduction sum w_j dir_j = e_c.  Each weighted pair
// contributes monopole loads -+ w_j/len_j at its ends (a pair carrying
// current w/len across separation len realizes moment w).
// Candidates are the dipoles touching a vertex of the source's host element,
// capped to the max_candidates nearest midpoints.
InterpolationMatrix build_interpolation_pbo(
    const std::vector<HdivDipole>& dipoles, const SourceSpace& sources,
    const TetrahedralMesh& mesh, const PboOptions& options = {});

// Host lookup used by source placement and the comparison harness: index of
// the kept element containing the point (barycentric tolerance 1e-12;
// smallest element index on shared faces), or -1.
class TetLocator {
 public:
  TetLocator(const TetrahedralMesh& mesh, const std::vector<int>& tets);
  int locate(const Vec3& point) const;

 private:
  const TetrahedralMesh& mesh_;
  std::vector<int> tets_;
  double cell_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<int> cell_start_;
  std::vector<int> cell_items_;
};

}  // namespace peelfield
