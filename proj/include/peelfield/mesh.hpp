#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace peelfield {

using Vec3 = Eigen::Vector3d;

// Labeled conforming tetrahedral mesh with per-compartment conductivities.
// Construction canonicalizes every element (vertex indices sorted ascending,
// then the last two swapped if needed so the signed volume is positive) and
// validates: indices in range, volume strictly positive, every label covered
// by the conductivity table with sigma > 0.
struct TetrahedralMesh {
  std::vector<Vec3> nodes;                    // positions in mm
  std::vector<std::array<int, 4>> tetra;      // canonical vertex indices
  std::vector<int> labels;                    // compartment label per element
  std::map<int, double> conductivities;       // label -> sigma in S/m

  TetrahedralMesh() = default;
  TetrahedralMesh(std::vector<Vec3> nodes_in,
                  std::vector<std::array<int, 4>> tetra_in,
                  std::vector<int> labels_in,
                  std::map<int, double> conductivities_in);

  int node_count() const { return static_cast<int>(nodes.size()); }
  int tet_count() const { return static_cast<int>(tetra.size()); }

  // Signed volume of element t; positive for every element after
  // canonicalization.
  double tet_volume(int t) const;
  Vec3 tet_centroid(int t) const;
  double total_volume() const;
  double label_volume(int label) const;

  // Median edge length over all elements (each element contributes its six
  // edges; shared edges are counted once per incident element on purpose --
  // this is a sizing heuristic, not a graph statistic).
  double median_edge_length() const;

  double conductivity_of(int t) const;

  // Orders one element in place: sort indices, then swap the last two if the
  // signed volume came out negative.  Exposed for mesh builders.
  static void canonicalize(std::array<int, 4>& tet,
                           const std::vector<Vec3>& nodes);

  // Throws ConfigError on any violated invariant; called by the constructor.
  void validate() const;
};

// Boundary of a compartment selection: the faces that belong to exactly one
// element of the selection.  Triangles store sorted node triples.
struct SurfaceMesh {
  std::vector<std::array<int, 3>> triangles;  // sorted node index triples
  std::vector<int> owner_tetra;               // selected element owning each face
  std::vector<int> surface_node_set;          // union of triangle nodes, sorted

  bool contains_node(int node) const;
};

// Faces with multiplicity one among the elements whose label is in
// `compartments`.  Throws ConfigError when the selection matches no element.
SurfaceMesh extract_surface(const TetrahedralMesh& mesh,
                            const std::set<int>& compartments);

// Index of the mesh-boundary node closest to `point` (whole-mesh surface,
// all labels selected); ties resolve to the smallest index.
int nearest_surface_node(const TetrahedralMesh& mesh, const Vec3& point);
int nearest_surface_node(const SurfaceMesh& boundary,
                         const TetrahedralMesh& mesh, const Vec3& point);

// Red/green refinement.  Elements with a selected label are split into eight
// (red); neighbours receive matching green closures so the result conforms.
// `rounds` applies the whole procedure repeatedly.
TetrahedralMesh refine_compartments(const TetrahedralMesh& mesh,
                                    const std::set<int>& compartments,
                                    int rounds = 1);

TetrahedralMesh load_mesh(const std::string& path);
void save_mesh(const TetrahedralMesh& mesh, const std::string& path);

}  // namespace peelfield
