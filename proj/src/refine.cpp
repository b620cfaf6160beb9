#include <algorithm>
#include <cstdint>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "peelfield/errors.hpp"
#include "peelfield/mesh.hpp"

namespace peelfield {

namespace {

// local edge slots of a tetrahedron
constexpr int kTetEdge[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

using EdgeKey = std::uint64_t;

EdgeKey edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<EdgeKey>(a) << 32) | static_cast<EdgeKey>(b);
}

// A tet's marked-edge bitmask is "green-splittable" when the marked edges are:
// none, a single edge, two edges (any pair), or the three edges of one face.
// Anything else forces a full red split.  Two marked edges always admit a
// green split: opposite edges double-bisect, adjacent edges share a face and
// split it into a corner triangle plus a quad.
bool green_splittable(unsigned mask) {
  const int count = __builtin_popcount(mask);
  if (count <= 2) return true;
  if (count != 3) return false;
  // three edges form a face iff their endpoint union has size 3
  unsigned vertices = 0;
  for (int e = 0; e < 6; ++e)
    if (mask & (1u << e))
      vertices |= (1u << kTetEdge[e][0]) | (1u << kTetEdge[e][1]);
  return __builtin_popcount(vertices) == 3;
}

struct Refiner {
  const TetrahedralMesh& mesh;
  const std::set<int>& selected;

  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> out_tets;
  std::vector<int> out_labels;
  std::unordered_set<EdgeKey> marked;
  std::unordered_map<EdgeKey, int> midpoint;

  explicit Refiner(const TetrahedralMesh& m, const std::set<int>& sel)
      : mesh(m), selected(sel), nodes(m.nodes) {}

  unsigned mask_of(int t) const {
    const auto& tet = mesh.tetra[t];
    unsigned mask = 0;
    for (int e = 0; e < 6; ++e)
      if (marked.count(edge_key(tet[kTetEdge[e][0]], tet[kTetEdge[e][1]])))
        mask |= (1u << e);
    return mask;
  }

  void mark_all_edges(int t) {
    const auto& tet = mesh.tetra[t];
    for (const auto& e : kTetEdge)
      marked.insert(edge_key(tet[e[0]], tet[e[1]]));
  }

  void mark_and_close() {
    for (int t = 0; t < mesh.tet_count(); ++t)
      if (selected.count(mesh.labels[t])) mark_all_edges(t);
    // promote tets whose pattern has no green closure until a fixpoint;
    // marking only grows, so this terminates
    bool changed = true;
    while (changed) {
      changed = false;
      for (int t = 0; t < mesh.tet_count(); ++t) {
        const unsigned mask = mask_of(t);
        if (mask != 0 && mask != 63u && !green_splittable(mask)) {
          mark_all_edges(t);
          changed = true;
        }
      }
    }
  }

  // midpoints numbered in sorted edge order so node ids are reproducible
  void allocate_midpoints() {
    std::vector<EdgeKey> keys(marked.begin(), marked.end());
    std::sort(keys.begin(), keys.end());
    for (EdgeKey key : keys) {
      const int a = static_cast<int>(key >> 32);
      const int b = static_cast<int>(key & 0xffffffffu);
      midpoint[key] = static_cast<int>(nodes.size());
      nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
    }
  }

  int mid(int a, int b) const { return midpoint.at(edge_key(a, b)); }

  void emit(int a, int b, int c, int d, int label) {
    out_tets.push_back({a, b, c, d});
    out_labels.push_back(label);
  }

  void split_red(const std::array<int, 4>& v, int label) {
    const int m01 = mid(v[0], v[1]), m02 = mid(v[0], v[2]),
              m03 = mid(v[0], v[3]), m12 = mid(v[1], v[2]),
              m13 = mid(v[1], v[3]), m23 = mid(v[2], v[3]);
    emit(v[0], m01, m02, m03, label);
    emit(m01, v[1], m12, m13, label);
    emit(m02, m12, v[2], m23, label);
    emit(m03, m13, m23, v[3], label);
    // central octahedron: cut along its shortest diagonal (ties keep the
    // listed order) into four tets around the diagonal
    struct Diagonal {
      int a, b;
      std::array<int, 4> ring;
    };
    const Diagonal diagonals[3] = {
        {m01, m23, {m02, m12, m13, m03}},
        {m02, m13, {m01, m12, m23, m03}},
        {m03, m12, {m01, m13, m23, m02}},
    };
    int pick = 0;
    double best = (nodes[diagonals[0].a] - nodes[diagonals[0].b]).squaredNorm();
    for (int k = 1; k < 3; ++k) {
      const double len2 =
          (nodes[diagonals[k].a] - nodes[diagonals[k].b]).squaredNorm();
      if (len2 < best) {
        best = len2;
        pick = k;
      }
    }
    const Diagonal& d = diagonals[pick];
    for (int k = 0; k < 4; ++k)
      emit(d.a, d.b, d.ring[k], d.ring[(k + 1) % 4], label);
  }

  // one marked edge: plain bisection
  void split_one(const std::array<int, 4>& v, unsigned mask, int label) {
    const int e = __builtin_ctz(mask);
    const int p = v[kTetEdge[e][0]], q = v[kTetEdge[e][1]];
    int rest[2], n = 0;
    for (int k = 0; k < 4; ++k)
      if (v[k] != p && v[k] != q) rest[n++] = v[k];
    const int m = mid(p, q);
    emit(p, m, rest[0], rest[1], label);
    emit(m, q, rest[0], rest[1], label);
  }

  void split_two(const std::array<int, 4>& v, unsigned mask, int label) {
    int e[2], n = 0;
    for (int k = 0; k < 6; ++k)
      if (mask & (1u << k)) e[n++] = k;
    const int a0 = v[kTetEdge[e[0]][0]], a1 = v[kTetEdge[e[0]][1]];
    const int b0 = v[kTetEdge[e[1]][0]], b1 = v[kTetEdge[e[1]][1]];
    int shared = -1;
    for (int x : {a0, a1})
      for (int y : {b0, b1})
        if (x == y) shared = x;
    if (shared < 0) {
      // opposite edges: bisect along the first, then along the second
      const int m1 = mid(a0, a1), m2 = mid(b0, b1);
      emit(a0, m1, b0, m2, label);
      emit(a0, m1, m2, b1, label);
      emit(m1, a1, b0, m2, label);
      emit(m1, a1, m2, b1, label);
      return;
    }
    // adjacent edges (vv,p), (vv,q) on face (vv,p,q); w is the apex.
    const int vv = shared;
    const int p = (a0 == vv) ? a1 : a0;
    const int q = (b0 == vv) ? b1 : b0;
    int w = -1;
    for (int x : v)
      if (x != vv && x != p && x != q) w = x;
    const int m1 = mid(vv, p), m2 = mid(vv, q);
    emit(vv, m1, m2, w, label);
    // quad (m1,p,q,m2): diagonal through the smaller of p,q so both tets
    // sharing the face agree on its triangulation
    if (p < q) {
      emit(m1, p, m2, w, label);
      emit(p, q, m2, w, label);
    } else {
      emit(m1, p, q, w, label);
      emit(m1, q, m2, w, label);
    }
  }

  // three marked edges forming face (f0,f1,f2); w is the apex
  void split_face(const std::array<int, 4>& v, unsigned mask, int label) {
    unsigned vertex_mask = 0;
    for (int e = 0; e < 6; ++e)
      if (mask & (1u << e))
        vertex_mask |= (1u << kTetEdge[e][0]) | (1u << kTetEdge[e][1]);
    int f[3], n = 0, w = -1;
    for (int k = 0; k < 4; ++k) {
      if (vertex_mask & (1u << k))
        f[n++] = v[k];
      else
        w = v[k];
    }
    const int m01 = mid(f[0], f[1]), m02 = mid(f[0], f[2]),
              m12 = mid(f[1], f[2]);
    emit(f[0], m01, m02, w, label);
    emit(m01, f[1], m12, w, label);
    emit(m02, m12, f[2], w, label);
    emit(m01, m12, m02, w, label);
  }

  TetrahedralMesh run() {
    mark_and_close();
    allocate_midpoints();
    out_tets.reserve(mesh.tet_count() * 2);
    out_labels.reserve(mesh.tet_count() * 2);
    for (int t = 0; t < mesh.tet_count(); ++t) {
      const auto& v = mesh.tetra[t];
      const unsigned mask = mask_of(t);
      const int label = mesh.labels[t];
      if (mask == 0) {
        emit(v[0], v[1], v[2], v[3], label);
      } else if (mask == 63u) {
        split_red(v, label);
      } else {
        switch (__builtin_popcount(mask)) {
          case 1:
            split_one(v, mask, label);
            break;
          case 2:
            split_two(v, mask, label);
            break;
          case 3:
            split_face(v, mask, label);
            break;
          default:
            throw NumericalError("refine: unreachable edge pattern");
        }
      }
    }
    return TetrahedralMesh(std::move(nodes), std::move(out_tets),
                           std::move(out_labels), mesh.conductivities);
  }
};

}  // namespace

TetrahedralMesh refine_compartments(const TetrahedralMesh& mesh,
                                    const std::set<int>& compartments,
                                    int rounds) {
  if (rounds < 0) throw ConfigError("refine: rounds must be >= 0");
  TetrahedralMesh current = mesh;
  for (int r = 0; r < rounds; ++r) {
    Refiner refiner(current, compartments);
    current = refiner.run();
  }
  return current;
}

}  // namespace peelfield
