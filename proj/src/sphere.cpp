#include "peelfield/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "peelfield/errors.hpp"

namespace peelfield {

void ShellSpec::validate() const {
  if (radii_mm.empty()) throw ConfigError("shell spec: at least one shell");
  if (radii_mm.size() != conductivities.size())
    throw ConfigError("shell spec: radii and conductivities differ in length");
  double prev = 0.0;
  for (double r : radii_mm) {
    if (!(r > prev))
      throw ConfigError("shell spec: radii must be positive and increasing");
    prev = r;
  }
  for (double s : conductivities)
    if (!(s > 0.0))
      throw ConfigError("shell spec: conductivities must be positive");
}

namespace {

// Node key in doubled lattice coordinates (primal sites even, cube centers
// odd), packed with a +kBias offset per axis.
constexpr std::int64_t kBias = 1 << 20;

std::int64_t pack(int x, int y, int z) {
  return ((static_cast<std::int64_t>(x) + kBias) << 42) |
         ((static_cast<std::int64_t>(y) + kBias) << 21) |
         (static_cast<std::int64_t>(z) + kBias);
}

}  // namespace

TetrahedralMesh generate_sphere_mesh(const ShellSpec& spec,
                                     double target_edge_mm) {
  spec.validate();
  if (!(target_edge_mm > 0.0))
    throw ConfigError("sphere mesh: target edge must be positive");
  if (target_edge_mm > spec.radii_mm.front())
    throw ConfigError("resolution too coarse");

  const double h = target_edge_mm;
  const double R = spec.outer_radius();
  const int n = static_cast<int>(std::ceil(R / h)) + 1;

  // Tetrahedra: one fan of four around every axis-aligned primal edge, using
  // the four adjacent cube centers in cyclic order.  Doubled coordinates keep
  // all site arithmetic exact.
  struct LatticeTet {
    std::array<std::array<int, 3>, 4> corners;
  };
  std::vector<LatticeTet> kept;
  const int perp[3][2] = {{1, 2}, {2, 0}, {0, 1}};
  const int ring[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};

  auto position = [h](const std::array<int, 3>& c) {
    return Vec3(0.5 * h * c[0], 0.5 * h * c[1], 0.5 * h * c[2]);
  };
  // Corners of straddling elements are pulled radially onto the surface, so
  // the mesh fills the ball without any node ever sitting beyond R.
  auto clamped = [&](const std::array<int, 3>& c) {
    Vec3 p = position(c);
    const double r = p.norm();
    return r > R ? Vec3(p * (R / r)) : p;
  };
  auto corner_vol = [](const std::array<Vec3, 4>& p) {
    return (p[1] - p[0]).cross(p[2] - p[0]).dot(p[3] - p[0]);
  };

  for (int i = -n - 1; i <= n; ++i)
    for (int j = -n - 1; j <= n; ++j)
      for (int k = -n - 1; k <= n; ++k)
        for (int axis = 0; axis < 3; ++axis) {
          std::array<int, 3> a = {2 * i, 2 * j, 2 * k};
          std::array<int, 3> b = a;
          b[axis] += 2;
          std::array<std::array<int, 3>, 4> centers;
          for (int t = 0; t < 4; ++t) {
            std::array<int, 3> c = a;
            c[axis] += 1;
            c[perp[axis][0]] += ring[t][0];
            c[perp[axis][1]] += ring[t][1];
            centers[t] = c;
          }
          for (int t = 0; t < 4; ++t) {
            LatticeTet tet{{a, b, centers[t], centers[(t + 1) % 4]}};
            // Keep elements whose centroid lies in the ball: discarding the
            // outward-straddling half and clamping the rest balances the
            // staircase volume around R instead of leaving a deficit, which
            // otherwise thins the outermost shell noticeably at coarse h.
            Vec3 centroid = Vec3::Zero();
            for (const auto& c : tet.corners) centroid += position(c);
            if (centroid.norm() > 4.0 * R * (1.0 + 1e-12)) continue;
            // Clamping flattens elements that hug the surface; drop those so
            // every kept element starts with a sound shape.
            std::array<Vec3, 4> raw, clip;
            for (int v = 0; v < 4; ++v) {
              raw[v] = position(tet.corners[v]);
              clip[v] = clamped(tet.corners[v]);
            }
            const double v0 = corner_vol(raw);
            const double sign = v0 < 0.0 ? -1.0 : 1.0;
            if (sign * corner_vol(clip) < 0.2 * std::abs(v0)) continue;
            kept.push_back(tet);
          }
        }
  if (kept.empty()) throw ConfigError("resolution too coarse");

  // Compact node numbering, sorted by packed lattice key for reproducibility.
  std::vector<std::int64_t> keys;
  keys.reserve(kept.size() * 4);
  for (const auto& tet : kept)
    for (const auto& c : tet.corners) keys.push_back(pack(c[0], c[1], c[2]));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::unordered_map<std::int64_t, int> index;
  index.reserve(keys.size() * 2);
  for (std::size_t i = 0; i < keys.size(); ++i)
    index[keys[i]] = static_cast<int>(i);

  std::vector<Vec3> nodes(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const int x = static_cast<int>((keys[i] >> 42) & 0x1fffff) - kBias;
    const int y = static_cast<int>((keys[i] >> 21) & 0x1fffff) - kBias;
    const int z = static_cast<int>(keys[i] & 0x1fffff) - kBias;
    nodes[i] = clamped({x, y, z});
  }

  std::vector<std::array<int, 4>> tets(kept.size());
  for (std::size_t t = 0; t < kept.size(); ++t)
    for (int c = 0; c < 4; ++c)
      tets[t][c] = index.at(pack(kept[t].corners[c][0], kept[t].corners[c][1],
                                 kept[t].corners[c][2]));

  // Boundary nodes: faces seen by exactly one element.
  std::vector<char> on_boundary(nodes.size(), 0);
  {
    struct Face {
      std::array<int, 3> key;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(tets.size() * 4);
    static constexpr int kFace[4][3] = {
        {1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto& tet : tets)
      for (const auto& f : kFace) {
        std::array<int, 3> key = {tet[f[0]], tet[f[1]], tet[f[2]]};
        std::sort(key.begin(), key.end());
        faces.push_back(key);
      }
    std::sort(faces.begin(), faces.end());
    for (std::size_t i = 0; i < faces.size();) {
      std::size_t j = i + 1;
      while (j < faces.size() && faces[j] == faces[i]) ++j;
      if (j - i == 1)
        for (int v : faces[i]) on_boundary[v] = 1;
      i = j;
    }
  }

  // Snap nodes radially onto the nearest shell radius so interfaces and the
  // outer surface are spherical rather than lattice staircases.  A staircase
  // matters most across thin resistive shells, where +-h/2 of thickness
  // modulation shifts the effective trans-shell conductance.  Boundary nodes
  // always go to R; interior nodes near an internal interface go to that
  // interface.  Snaps that would collapse or invert an element are reverted.
  const std::vector<Vec3> original = nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double r = nodes[i].norm();
    if (on_boundary[i]) {
      if (r >= R - 0.45 * h && r > 0.0 && r < R) nodes[i] *= R / r;
      continue;
    }
    double best = 0.35 * h;
    double target = -1.0;
    for (int s = 0; s + 1 < spec.shell_count(); ++s) {
      const double d = std::abs(r - spec.radii_mm[s]);
      if (d <= best) {
        best = d;
        target = spec.radii_mm[s];
      }
    }
    if (target > 0.0 && r > 0.0) nodes[i] *= target / r;
  }
  auto signed_vol = [&](const std::vector<Vec3>& at,
                        const std::array<int, 4>& t) {
    return (at[t[1]] - at[t[0]])
        .cross(at[t[2]] - at[t[0]])
        .dot(at[t[3]] - at[t[0]]);
  };
  std::vector<double> orig_vol(tets.size());
  for (std::size_t t = 0; t < tets.size(); ++t)
    orig_vol[t] = signed_vol(original, tets[t]);
  // Keeping at least 20% of the lattice volume bounds the aspect-ratio damage
  // a snap can do; slivers below that poison the stiffness conditioning and
  // the iterative transfer solves stop converging in reasonable time.
  for (int pass = 0; pass < 8; ++pass) {
    bool reverted = false;
    for (std::size_t t = 0; t < tets.size(); ++t) {
      const double sign = orig_vol[t] < 0.0 ? -1.0 : 1.0;
      if (sign * signed_vol(nodes, tets[t]) > 0.2 * std::abs(orig_vol[t]))
        continue;
      for (int v : tets[t])
        if ((nodes[v] - original[v]).squaredNorm() > 0.0) {
          nodes[v] = original[v];
          reverted = true;
        }
    }
    if (!reverted) break;
  }

  std::vector<int> labels(tets.size());
  for (std::size_t t = 0; t < tets.size(); ++t) {
    Vec3 centroid = Vec3::Zero();
    for (int v : tets[t]) centroid += nodes[v];
    const double dist = (centroid / 4.0).norm();
    int label = spec.shell_count();  // outermost catches rounding at R
    for (int s = 0; s < spec.shell_count(); ++s)
      if (dist <= spec.radii_mm[s]) {
        label = s + 1;
        break;
      }
    labels[t] = label;
  }

  std::map<int, double> sigma;
  for (int s = 0; s < spec.shell_count(); ++s)
    sigma[s + 1] = spec.conductivities[s];

  return TetrahedralMesh(std::move(nodes), std::move(tets), std::move(labels),
                         std::move(sigma));
}

std::vector<Vec3> fibonacci_montage(double radius_mm, int n) {
  if (n <= 0) throw ConfigError("montage: sensor count must be positive");
  std::vector<Vec3> points(n);
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * k;
    points[k] =
        radius_mm * Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return points;
}

std::vector<Vec3> ring_montage(double radius_mm,
                               const std::vector<double>& cos_thetas,
                               int n_azimuth) {
  if (n_azimuth <= 0) throw ConfigError("montage: sensor count must be positive");
  if (cos_thetas.empty()) throw ConfigError("montage: no latitude rings given");
  std::vector<Vec3> points;
  points.reserve(cos_thetas.size() * n_azimuth);
  for (std::size_t ring = 0; ring < cos_thetas.size(); ++ring) {
    const double c = cos_thetas[ring];
    if (c < -1.0 || c > 1.0)
      throw ConfigError("montage: cos(theta) outside [-1, 1]");
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    // offset alternate rings by half a step so sensors do not stack in phi
    const double phase = (ring % 2 == 0) ? 0.0 : M_PI / n_azimuth;
    for (int k = 0; k < n_azimuth; ++k) {
      const double phi = phase + 2.0 * M_PI * k / n_azimuth;
      points.push_back(radius_mm *
                       Vec3(s * std::cos(phi), s * std::sin(phi), c));
    }
  }
  return points;
}

}  // namespace peelfield
