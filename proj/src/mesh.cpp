#include "peelfield/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "peelfield/errors.hpp"

namespace peelfield {

namespace {

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c,
                     const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

}  // namespace

TetrahedralMesh::TetrahedralMesh(std::vector<Vec3> nodes_in,
                                 std::vector<std::array<int, 4>> tetra_in,
                                 std::vector<int> labels_in,
                                 std::map<int, double> conductivities_in)
    : nodes(std::move(nodes_in)),
      tetra(std::move(tetra_in)),
      labels(std::move(labels_in)),
      conductivities(std::move(conductivities_in)) {
  const int n = node_count();
  for (auto& tet : tetra) {
    for (int v : tet)
      if (v < 0 || v >= n)
        throw ConfigError("mesh: vertex index " + std::to_string(v) +
                          " out of range [0, " + std::to_string(n) + ")");
    canonicalize(tet, nodes);
  }
  validate();
}

void TetrahedralMesh::canonicalize(std::array<int, 4>& tet,
                                   const std::vector<Vec3>& nodes) {
  std::sort(tet.begin(), tet.end());
  if (signed_volume(nodes[tet[0]], nodes[tet[1]], nodes[tet[2]],
                    nodes[tet[3]]) < 0.0)
    std::swap(tet[2], tet[3]);
}

void TetrahedralMesh::validate() const {
  if (labels.size() != tetra.size())
    throw ConfigError("mesh: " + std::to_string(tetra.size()) +
                      " elements but " + std::to_string(labels.size()) +
                      " labels");
  for (int t = 0; t < tet_count(); ++t) {
    const auto& tet = tetra[t];
    if (tet[0] == tet[1] || tet[1] == tet[2] || tet[2] == tet[3])
      throw ConfigError("mesh: element " + std::to_string(t) +
                        " has repeated vertices");
    if (tet_volume(t) <= 0.0)
      throw ConfigError("mesh: element " + std::to_string(t) +
                        " has non-positive volume");
  }
  for (int label : labels) {
    auto it = conductivities.find(label);
    if (it == conductivities.end())
      throw ConfigError("mesh: no conductivity for label " +
                        std::to_string(label));
    if (!(it->second > 0.0) || !std::isfinite(it->second))
      throw ConfigError("mesh: conductivity for label " +
                        std::to_string(label) + " must be positive");
  }
}

double TetrahedralMesh::tet_volume(int t) const {
  const auto& v = tetra[t];
  return signed_volume(nodes[v[0]], nodes[v[1]], nodes[v[2]], nodes[v[3]]);
}

Vec3 TetrahedralMesh::tet_centroid(int t) const {
  const auto& v = tetra[t];
  return (nodes[v[0]] + nodes[v[1]] + nodes[v[2]] + nodes[v[3]]) / 4.0;
}

double TetrahedralMesh::total_volume() const {
  double sum = 0.0;
  for (int t = 0; t < tet_count(); ++t) sum += tet_volume(t);
  return sum;
}

double TetrahedralMesh::label_volume(int label) const {
  double sum = 0.0;
  for (int t = 0; t < tet_count(); ++t)
    if (labels[t] == label) sum += tet_volume(t);
  return sum;
}

double TetrahedralMesh::median_edge_length() const {
  static constexpr int kEdge[6][2] = {{0, 1}, {0, 2}, {0, 3},
                                      {1, 2}, {1, 3}, {2, 3}};
  std::vector<double> lengths;
  lengths.reserve(tetra.size() * 6);
  for (const auto& tet : tetra)
    for (const auto& e : kEdge)
      lengths.push_back((nodes[tet[e[0]]] - nodes[tet[e[1]]]).norm());
  if (lengths.empty()) throw ConfigError("mesh: no elements");
  const std::size_t mid = lengths.size() / 2;
  std::nth_element(lengths.begin(), lengths.begin() + mid, lengths.end());
  return lengths[mid];
}

double TetrahedralMesh::conductivity_of(int t) const {
  return conductivities.at(labels[t]);
}

bool SurfaceMesh::contains_node(int node) const {
  return std::binary_search(surface_node_set.begin(), surface_node_set.end(), node);
}

SurfaceMesh extract_surface(const TetrahedralMesh& mesh,
                            const std::set<int>& compartments) {
  // face slot k of an element = the three vertices other than vertex k
  static constexpr int kFace[4][3] = {
      {1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};

  struct FaceRecord {
    std::array<int, 3> key;  // sorted node triple
    int owner;               // element index
    int slot;                // face slot within the element
  };

  std::vector<FaceRecord> faces;
  bool any_selected = false;
  for (int t = 0; t < mesh.tet_count(); ++t) {
    if (compartments.find(mesh.labels[t]) == compartments.end()) continue;
    any_selected = true;
    const auto& tet = mesh.tetra[t];
    for (int s = 0; s < 4; ++s) {
      std::array<int, 3> key = {tet[kFace[s][0]], tet[kFace[s][1]],
                                tet[kFace[s][2]]};
      std::sort(key.begin(), key.end());
      faces.push_back({key, t, s});
    }
  }
  if (!any_selected) throw ConfigError("no tetra in compartments");

  std::sort(faces.begin(), faces.end(),
            [](const FaceRecord& a, const FaceRecord& b) {
              if (a.key != b.key) return a.key < b.key;
              return a.owner < b.owner;
            });

  SurfaceMesh surface;
  std::size_t i = 0;
  while (i < faces.size()) {
    std::size_t j = i + 1;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i == 1) {
      surface.triangles.push_back(faces[i].key);
      surface.owner_tetra.push_back(faces[i].owner);
    }
    i = j;
  }

  // present the boundary in (owner element, face slot) order
  {
    std::vector<std::size_t> order(surface.triangles.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (surface.owner_tetra[a] != surface.owner_tetra[b])
        return surface.owner_tetra[a] < surface.owner_tetra[b];
      return surface.triangles[a] < surface.triangles[b];
    });
    SurfaceMesh ordered;
    ordered.triangles.reserve(surface.triangles.size());
    ordered.owner_tetra.reserve(surface.triangles.size());
    for (std::size_t k : order) {
      ordered.triangles.push_back(surface.triangles[k]);
      ordered.owner_tetra.push_back(surface.owner_tetra[k]);
    }
    surface.triangles.swap(ordered.triangles);
    surface.owner_tetra.swap(ordered.owner_tetra);
  }

  surface.surface_node_set.reserve(surface.triangles.size() * 3);
  for (const auto& tri : surface.triangles)
    surface.surface_node_set.insert(surface.surface_node_set.end(), tri.begin(), tri.end());
  std::sort(surface.surface_node_set.begin(), surface.surface_node_set.end());
  surface.surface_node_set.erase(std::unique(surface.surface_node_set.begin(), surface.surface_node_set.end()),
                      surface.surface_node_set.end());
  return surface;
}

int nearest_surface_node(const SurfaceMesh& boundary,
                         const TetrahedralMesh& mesh, const Vec3& point) {
  if (boundary.surface_node_set.empty()) throw ConfigError("surface has no nodes");
  int best = boundary.surface_node_set.front();
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int node : boundary.surface_node_set) {
    const double d2 = (mesh.nodes[node] - point).squaredNorm();
    if (d2 < best_d2) {  // strict: ties keep the smallest index (sorted scan)
      best_d2 = d2;
      best = node;
    }
  }
  return best;
}

int nearest_surface_node(const TetrahedralMesh& mesh, const Vec3& point) {
  std::set<int> all(mesh.labels.begin(), mesh.labels.end());
  return nearest_surface_node(extract_surface(mesh, all), mesh, point);
}

}  // namespace peelfield
