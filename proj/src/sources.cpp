#include "peelfield/sources.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "peelfield/errors.hpp"

namespace peelfield {

namespace {

using PairKey = std::uint64_t;

PairKey pair_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<PairKey>(a) << 32) | static_cast<PairKey>(b);
}

constexpr int kTetEdge[6][2] = {{0, 1}, {0, 2}, {0, 3},
                                {1, 2}, {1, 3}, {2, 3}};
constexpr int kTetFace[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};

HdivDipole make_dipole(const TetrahedralMesh& mesh, int a, int b,
                       HdivDipole::Kind kind, int host) {
  if (a > b) std::swap(a, b);
  HdivDipole d;
  d.node_a = a;
  d.node_b = b;
  d.kind = kind;
  d.host_tetra = host;
  const Vec3 delta = mesh.nodes[b] - mesh.nodes[a];
  d.length_mm = delta.norm();
  d.direction = delta / d.length_mm;
  d.position = 0.5 * (mesh.nodes[a] + mesh.nodes[b]);
  return d;
}

}  // namespace

TetLocator::TetLocator(const TetrahedralMesh& mesh,
                       const std::vector<int>& tets)
    : mesh_(mesh), tets_(tets) {
  if (tets_.empty()) throw ConfigError("tet locator: empty element set");
  Vec3 lo = mesh_.nodes[mesh_.tetra[tets_[0]][0]];
  Vec3 hi = lo;
  double edge_sum = 0.0;
  for (int t : tets_) {
    for (int v : mesh_.tetra[t]) {
      lo = lo.cwiseMin(mesh_.nodes[v]);
      hi = hi.cwiseMax(mesh_.nodes[v]);
    }
    edge_sum += (mesh_.nodes[mesh_.tetra[t][1]] - mesh_.nodes[mesh_.tetra[t][0]])
                    .norm();
  }
  cell_ = std::max(1e-9, 1.5 * edge_sum / tets_.size());
  origin_ = lo;
  nx_ = static_cast<int>(std::floor((hi.x() - lo.x()) / cell_)) + 1;
  ny_ = static_cast<int>(std::floor((hi.y() - lo.y()) / cell_)) + 1;
  nz_ = static_cast<int>(std::floor((hi.z() - lo.z()) / cell_)) + 1;

  // bucket every element into all cells its bounding box overlaps
  const std::size_t n_cells = static_cast<std::size_t>(nx_) * ny_ * nz_;
  std::vector<std::vector<int>> buckets(n_cells);
  for (int t : tets_) {
    Vec3 tlo = mesh_.nodes[mesh_.tetra[t][0]], thi = tlo;
    for (int v : mesh_.tetra[t]) {
      tlo = tlo.cwiseMin(mesh_.nodes[v]);
      thi = thi.cwiseMax(mesh_.nodes[v]);
    }
    const int x0 = std::clamp(
        static_cast<int>((tlo.x() - origin_.x()) / cell_), 0, nx_ - 1);
    const int x1 = std::clamp(
        static_cast<int>((thi.x() - origin_.x()) / cell_), 0, nx_ - 1);
    const int y0 = std::clamp(
        static_cast<int>((tlo.y() - origin_.y()) / cell_), 0, ny_ - 1);
    const int y1 = std::clamp(
        static_cast<int>((thi.y() - origin_.y()) / cell_), 0, ny_ - 1);
    const int z0 = std::clamp(
        static_cast<int>((tlo.z() - origin_.z()) / cell_), 0, nz_ - 1);
    const int z1 = std::clamp(
        static_cast<int>((thi.z() - origin_.z()) / cell_), 0, nz_ - 1);
    for (int x = x0; x <= x1; ++x)
      for (int y = y0; y <= y1; ++y)
        for (int z = z0; z <= z1; ++z)
          buckets[(static_cast<std::size_t>(x) * ny_ + y) * nz_ + z]
              .push_back(t);
  }
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t c = 0; c < n_cells; ++c)
    cell_start_[c + 1] = cell_start_[c] + static_cast<int>(buckets[c].size());
  cell_items_.resize(cell_start_.back());
  for (std::size_t c = 0; c < n_cells; ++c)
    std::copy(buckets[c].begin(), buckets[c].end(),
              cell_items_.begin() + cell_start_[c]);
}

int TetLocator::locate(const Vec3& point) const {
  const int cx = static_cast<int>(std::floor((point.x() - origin_.x()) / cell_));
  const int cy = static_cast<int>(std::floor((point.y() - origin_.y()) / cell_));
  const int cz = static_cast<int>(std::floor((point.z() - origin_.z()) / cell_));
  if (cx < 0 || cx >= nx_ || cy < 0 || cy >= ny_ || cz < 0 || cz >= nz_)
    return -1;
  const std::size_t c = (static_cast<std::size_t>(cx) * ny_ + cy) * nz_ + cz;

  int best = -1;
  for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
    const int t = cell_items_[k];
    const auto& tet = mesh_.tetra[t];
    const Vec3& x0 = mesh_.nodes[tet[0]];
    Eigen::Matrix3d J;
    J.col(0) = mesh_.nodes[tet[1]] - x0;
    J.col(1) = mesh_.nodes[tet[2]] - x0;
    J.col(2) = mesh_.nodes[tet[3]] - x0;
    const Vec3 bc = J.partialPivLu().solve(point - x0);
    const double b0 = 1.0 - bc.sum();
    constexpr double kTol = -1e-12;
    if (bc.x() >= kTol && bc.y() >= kTol && bc.z() >= kTol && b0 >= kTol)
      if (best < 0 || t < best) best = t;  // lowest index wins on faces
  }
  return best;
}

SourceSpace place_sources(const TetrahedralMesh& mesh, const PeelResult& peel,
                          int target_count) {
  if (target_count < 1)
    throw ConfigError("place sources: target count must be >= 1");
  if (peel.kept_tetra.empty())
    throw ConfigError("peeled source space is empty");

  const TetLocator locator(mesh, peel.kept_tetra);

  Vec3 lo = mesh.nodes[mesh.tetra[peel.kept_tetra[0]][0]];
  Vec3 hi = lo;
  double kept_volume = 0.0;
  for (int t : peel.kept_tetra) {
    for (int v : mesh.tetra[t]) {
      lo = lo.cwiseMin(mesh.nodes[v]);
      hi = hi.cwiseMax(mesh.nodes[v]);
    }
    kept_volume += mesh.tet_volume(t);
  }

  // Lattice anchored at the world origin so the pattern does not depend on
  // the bounding box; cell centers falling inside a kept element are kept.
  auto generate = [&](double spacing, SourceSpace* out) -> int {
    const long ix0 = static_cast<long>(std::floor(lo.x() / spacing));
    const long ix1 = static_cast<long>(std::floor(hi.x() / spacing));
    const long iy0 = static_cast<long>(std::floor(lo.y() / spacing));
    const long iy1 = static_cast<long>(std::floor(hi.y() / spacing));
    const long iz0 = static_cast<long>(std::floor(lo.z() / spacing));
    const long iz1 = static_cast<long>(std::floor(hi.z() / spacing));
    int count = 0;
    for (long i = ix0; i <= ix1; ++i)
      for (long j = iy0; j <= iy1; ++j)
        for (long k = iz0; k <= iz1; ++k) {
          const Vec3 center((i + 0.5) * spacing, (j + 0.5) * spacing,
                            (k + 0.5) * spacing);
          const int host = locator.locate(center);
          if (host < 0) continue;
          ++count;
          if (out) {
            out->positions.push_back(center);
            out->host_tetra.push_back(host);
          }
        }
    return count;
  };

  double s0 = std::cbrt(kept_volume / target_count);
  if (!(s0 > 0.0) || !std::isfinite(s0)) s0 = 1.0;

  // Bracket, then bisect on spacing; count decreases as spacing grows.
  double s_lo = s0, s_hi = s0;  // s_lo: count >= target; s_hi: count <= target
  int c_lo = generate(s0, nullptr), c_hi = c_lo;
  for (int guard = 0; guard < 60 && c_lo < target_count; ++guard) {
    s_lo /= 1.3;
    c_lo = generate(s_lo, nullptr);
  }
  for (int guard = 0; guard < 60 && c_hi > target_count; ++guard) {
    s_hi *= 1.3;
    c_hi = generate(s_hi, nullptr);
  }

  // an empty lattice is never acceptable while any spacing places a source,
  // so rank zero counts below everything else
  auto badness = [&](int c) {
    return c == 0 ? std::numeric_limits<double>::infinity()
                  : static_cast<double>(std::abs(c - target_count));
  };
  double best_s = badness(c_lo) <= badness(c_hi) ? s_lo : s_hi;
  int best_c = generate(best_s, nullptr);
  const double tolerance = 0.02 * target_count;
  for (int iter = 0;
       iter < 30 && std::abs(best_c - target_count) > tolerance; ++iter) {
    const double mid = 0.5 * (s_lo + s_hi);
    const int c_mid = generate(mid, nullptr);
    if (badness(c_mid) < badness(best_c)) {
      best_s = mid;
      best_c = c_mid;
    }
    if (c_mid >= target_count)
      s_lo = mid;
    else
      s_hi = mid;
  }

  SourceSpace space;
  generate(best_s, &space);
  if (space.count() == 0) throw ConfigError("peeled source space is empty");
  return space;
}

std::vector<HdivDipole> enumerate_hdiv_dipoles(const TetrahedralMesh& mesh,
                                               const std::vector<int>& kept) {
  if (kept.empty()) throw ConfigError("dipole enumeration: empty kept set");

  std::vector<HdivDipole> dipoles;
  std::unordered_map<PairKey, int> seen;  // node pair -> dipole list index

  for (int t : kept)
    for (const auto& e : kTetEdge) {
      const int a = mesh.tetra[t][e[0]], b = mesh.tetra[t][e[1]];
      const PairKey key = pair_key(a, b);
      if (seen.emplace(key, static_cast<int>(dipoles.size())).second)
        dipoles.push_back(
            make_dipole(mesh, a, b, HdivDipole::Kind::kEdgewise, t));
    }

  // Interior faces of the kept set carry one opposite-vertex pair each.
  struct FaceRecord {
    std::array<int, 3> key;
    int tet;
    int apex;
  };
  std::vector<FaceRecord> faces;
  faces.reserve(kept.size() * 4);
  for (int t : kept)
    for (int s = 0; s < 4; ++s) {
      std::array<int, 3> key = {mesh.tetra[t][kTetFace[s][0]],
                                mesh.tetra[t][kTetFace[s][1]],
                                mesh.tetra[t][kTetFace[s][2]]};
      std::sort(key.begin(), key.end());
      faces.push_back({key, t, mesh.tetra[t][s]});
    }
  std::sort(faces.begin(), faces.end(),
            [](const FaceRecord& a, const FaceRecord& b) {
              if (a.key != b.key) return a.key < b.key;
              return a.tet < b.tet;
            });

  std::vector<HdivDipole> crossers;
  for (std::size_t i = 0; i + 1 < faces.size(); ++i) {
    if (faces[i].key != faces[i + 1].key) continue;
    crossers.push_back(make_dipole(mesh, faces[i].apex, faces[i + 1].apex,
                                   HdivDipole::Kind::kFaceIntersecting,
                                   std::min(faces[i].tet, faces[i + 1].tet)));
    ++i;  // conforming meshes have multiplicity <= 2
  }
  std::sort(crossers.begin(), crossers.end(),
            [](const HdivDipole& a, const HdivDipole& b) {
              if (a.host_tetra != b.host_tetra)
                return a.host_tetra < b.host_tetra;
              return std::make_pair(a.node_a, a.node_b) <
                     std::make_pair(b.node_a, b.node_b);
            });
  for (const auto& d : crossers) {
    const PairKey key = pair_key(d.node_a, d.node_b);
    if (seen.emplace(key, static_cast<int>(dipoles.size())).second)
      dipoles.push_back(d);
  }
  return dipoles;
}

InterpolationMatrix build_interpolation_pbo(
    const std::vector<HdivDipole>& dipoles, const SourceSpace& sources,
    const TetrahedralMesh& mesh, const PboOptions& options) {
  if (dipoles.empty()) throw ConfigError("PBO: no candidate dipoles");
  if (options.max_candidates < 3)
    throw ConfigError("PBO: max_candidates must be >= 3");

  // node -> incident dipoles
  std::unordered_map<int, std::vector<int>> incidence;
  for (std::size_t j = 0; j < dipoles.size(); ++j) {
    incidence[dipoles[j].node_a].push_back(static_cast<int>(j));
    incidence[dipoles[j].node_b].push_back(static_cast<int>(j));
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < sources.count(); ++i) {
    const Vec3& x = sources.positions[i];
    const auto& host = mesh.tetra[sources.host_tetra[i]];

    std::vector<int> candidates;
    for (int v : host) {
      auto it = incidence.find(v);
      if (it == incidence.end()) continue;
      candidates.insert(candidates.end(), it->second.begin(),
                        it->second.end());
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    if (candidates.size() < 3)
      throw NumericalError("PBO: source " + std::to_string(i) +
                           " has fewer than 3 candidate dipoles");

    // keep the nearest midpoints; ties resolve by dipole index
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(candidates.size());
    for (int j : candidates)
      ranked.emplace_back((dipoles[j].position - x).squaredNorm(), j);
    std::sort(ranked.begin(), ranked.end());
    if (static_cast<int>(ranked.size()) > options.max_candidates)
      ranked.resize(options.max_candidates);

    double max_q = 0.0;
    for (const auto& [d2, j] : ranked) {
      max_q = std::max(max_q, d2);
      max_q = std::max(max_q, dipoles[j].length_mm * dipoles[j].length_mm);
    }
    // The floor keeps an on-source candidate from collapsing the quadratic:
    // it still out-competes the rest by a factor 1e6 in cost, but the KKT
    // system stays well enough conditioned to honor the moment constraint
    // to machine precision.
    const double q_floor = 1e-6 * std::max(max_q, 1e-300);

    // Constrained least squares in the dipole MOMENTS w_j (loads are then
    // +-w_j/len_j): minimize sum w_j^2 d_j^2 subject to sum w_j dir_j = e_c.
    // KKT gives w_j = dir_j . mu / q_j with H mu = e_c, H = sum dir dir^T/q.
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (const auto& [d2, j] : ranked) {
      const Vec3& m = dipoles[j].direction;
      H += m * m.transpose() / (d2 + q_floor);
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(2) <
        1e-12 * std::max(svd.singularValues()(0), 1e-300))
      throw NumericalError(
          "PBO: candidates for source " + std::to_string(i) +
          " span fewer than 3 directions (over-peeled or sliver region)");
    const Eigen::Matrix3d Hinv = svd.solve(Eigen::Matrix3d::Identity());

    for (int c = 0; c < 3; ++c) {
      Vec3 e_c = Vec3::Zero();
      e_c[c] = 1.0;
      Vec3 mu = Hinv.col(c);
      // H spans ~12 decades of scale when a candidate sits on the source, so
      // one solve leaves a visible moment residual; refine it down to eps
      for (int refine = 0; refine < 2; ++refine)
        mu += svd.solve(Eigen::Vector3d(e_c - H * mu));
      const int col = 3 * i + c;
      for (const auto& [d2, j] : ranked) {
        const HdivDipole& dip = dipoles[j];
        const double w = dip.direction.dot(mu) / (d2 + q_floor);
        if (w == 0.0) continue;
        const double load = w / dip.length_mm;
        triplets.emplace_back(dip.node_a, col, -load);
        triplets.emplace_back(dip.node_b, col, load);
      }
    }
  }

  InterpolationMatrix D(mesh.node_count(), 3 * sources.count());
  D.setFromTriplets(triplets.begin(), triplets.end());
  D.makeCompressed();
  return D;
}

}  // namespace peelfield
