#include "peelfield/peel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "peelfield/errors.hpp"

namespace peelfield {

PointGrid::PointGrid(const std::vector<Vec3>& points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (points_.empty()) throw ConfigError("point grid: empty point set");
  if (!(cell_ > 0.0)) throw ConfigError("point grid: cell size must be > 0");
  Vec3 lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  nx_ = static_cast<int>(std::floor((hi.x() - lo.x()) / cell_)) + 1;
  ny_ = static_cast<int>(std::floor((hi.y() - lo.y()) / cell_)) + 1;
  nz_ = static_cast<int>(std::floor((hi.z() - lo.z()) / cell_)) + 1;

  const std::size_t n_cells =
      static_cast<std::size_t>(nx_) * ny_ * nz_;
  std::vector<int> counts(n_cells, 0);
  auto cell_of = [&](const Vec3& p) {
    const int cx = std::min(nx_ - 1, static_cast<int>((p.x() - origin_.x()) / cell_));
    const int cy = std::min(ny_ - 1, static_cast<int>((p.y() - origin_.y()) / cell_));
    const int cz = std::min(nz_ - 1, static_cast<int>((p.z() - origin_.z()) / cell_));
    return (static_cast<std::size_t>(cx) * ny_ + cy) * nz_ + cz;
  };
  for (const auto& p : points_) ++counts[cell_of(p)];
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t c = 0; c < n_cells; ++c)
    cell_start_[c + 1] = cell_start_[c] + counts[c];
  cell_items_.resize(points_.size());
  std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i)
    cell_items_[cursor[cell_of(points_[i])]++] = static_cast<int>(i);
}

double PointGrid::min_distance(const Vec3& query) const {
  // Cell coordinates may lie outside the grid; rings are intersected with
  // the valid range.  Any point in Chebyshev ring r is at least (r-1)*cell
  // away, so the scan can stop once best <= r*cell after finishing ring r.
  const int qx = static_cast<int>(std::floor((query.x() - origin_.x()) / cell_));
  const int qy = static_cast<int>(std::floor((query.y() - origin_.y()) / cell_));
  const int qz = static_cast<int>(std::floor((query.z() - origin_.z()) / cell_));

  const int max_ring =
      std::max({qx, nx_ - 1 - qx, qy, ny_ - 1 - qy, qz, nz_ - 1 - qz,
                0}) +
      std::max({nx_, ny_, nz_});

  double best2 = std::numeric_limits<double>::infinity();
  for (int ring = 0; ring <= max_ring; ++ring) {
    if (std::isfinite(best2) &&
        std::sqrt(best2) <= static_cast<double>(ring - 1) * cell_)
      break;
    for (int dx = -ring; dx <= ring; ++dx) {
      const int cx = qx + dx;
      if (cx < 0 || cx >= nx_) continue;
      for (int dy = -ring; dy <= ring; ++dy) {
        const int cy = qy + dy;
        if (cy < 0 || cy >= ny_) continue;
        const bool face_x = std::abs(dx) == ring;
        const bool face_y = std::abs(dy) == ring;
        for (int dz = -ring; dz <= ring; ++dz) {
          if (!face_x && !face_y && std::abs(dz) != ring) continue;
          const int cz = qz + dz;
          if (cz < 0 || cz >= nz_) continue;
          const std::size_t c =
              (static_cast<std::size_t>(cx) * ny_ + cy) * nz_ + cz;
          for (int k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            const double d2 = (points_[cell_items_[k]] - query).squaredNorm();
            if (d2 < best2) best2 = d2;
          }
        }
      }
    }
  }
  return std::sqrt(best2);
}

PeelResult peel(const TetrahedralMesh& mesh, const PeelConfig& config) {
  if (config.active_compartments.empty())
    throw ConfigError("peel: active compartment set is empty");
  if (config.depth_mm < 0.0)
    throw ConfigError("peel: depth must be non-negative");

  const SurfaceMesh surface =
      extract_surface(mesh, config.active_compartments);

  std::vector<int> active_tets;
  for (int t = 0; t < mesh.tet_count(); ++t)
    if (config.active_compartments.count(mesh.labels[t]))
      active_tets.push_back(t);

  std::vector<int> active_nodes;
  active_nodes.reserve(active_tets.size() * 4);
  for (int t : active_tets)
    for (int v : mesh.tetra[t]) active_nodes.push_back(v);
  std::sort(active_nodes.begin(), active_nodes.end());
  active_nodes.erase(std::unique(active_nodes.begin(), active_nodes.end()),
                     active_nodes.end());

  std::vector<Vec3> surface_points;
  surface_points.reserve(surface.surface_node_set.size());
  for (int v : surface.surface_node_set)
    surface_points.push_back(mesh.nodes[v]);
  const double cell = std::max(config.depth_mm, mesh.median_edge_length());
  const PointGrid grid(surface_points, cell);

  // qualification per node: off the surface and at standoff >= depth
  std::vector<char> qualifies(mesh.node_count(), 0);
  for (int v : active_nodes) {
    if (surface.contains_node(v)) continue;
    qualifies[v] = grid.min_distance(mesh.nodes[v]) >= config.depth_mm;
  }

  PeelResult result;
  result.surface_nodes = surface.surface_node_set;
  for (int t : active_tets) {
    const auto& tet = mesh.tetra[t];
    const bool keep = qualifies[tet[0]] && qualifies[tet[1]] &&
                      qualifies[tet[2]] && qualifies[tet[3]];
    (keep ? result.kept_tetra : result.removed_tetra).push_back(t);
  }
  return result;
}

EffectiveDepth effective_depth(const TetrahedralMesh& mesh,
                               const PeelResult& result) {
  if (result.kept_tetra.empty())
    return {std::numeric_limits<double>::infinity(), true};

  std::vector<Vec3> surface_points;
  surface_points.reserve(result.surface_nodes.size());
  for (int v : result.surface_nodes) surface_points.push_back(mesh.nodes[v]);
  const PointGrid grid(surface_points, mesh.median_edge_length());

  std::vector<int> kept_nodes;
  kept_nodes.reserve(result.kept_tetra.size() * 4);
  for (int t : result.kept_tetra)
    for (int v : mesh.tetra[t]) kept_nodes.push_back(v);
  std::sort(kept_nodes.begin(), kept_nodes.end());
  kept_nodes.erase(std::unique(kept_nodes.begin(), kept_nodes.end()),
                   kept_nodes.end());

  double minimum = std::numeric_limits<double>::infinity();
  for (int v : kept_nodes)
    minimum = std::min(minimum, grid.min_distance(mesh.nodes[v]));
  return {minimum, false};
}

}  // namespace peelfield
