#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "peelfield/mesh.hpp"
#include "peelfield/peel.hpp"
#include "support.hpp"

using namespace peelfield;

namespace {

// Exhaustive reference implementation: direct distance scans, no grid.
PeelResult peel_oracle(const TetrahedralMesh& mesh, const PeelConfig& config) {
  const SurfaceMesh surface =
      extract_surface(mesh, config.active_compartments);
  std::vector<char> qualifies(mesh.node_count(), 0);
  for (int n = 0; n < mesh.node_count(); ++n) {
    if (surface.contains_node(n)) continue;
    double best = 1e300;
    for (int s : surface.surface_node_set)
      best = std::min(best, (mesh.nodes[n] - mesh.nodes[s]).norm());
    qualifies[n] = best >= config.depth_mm;
  }
  PeelResult result;
  result.surface_nodes = surface.surface_node_set;
  for (int t = 0; t < mesh.tet_count(); ++t) {
    if (!config.active_compartments.count(mesh.labels[t])) continue;
    const auto& tet = mesh.tetra[t];
    const bool keep = qualifies[tet[0]] && qualifies[tet[1]] &&
                      qualifies[tet[2]] && qualifies[tet[3]];
    (keep ? result.kept_tetra : result.removed_tetra).push_back(t);
  }
  return result;
}

}  // namespace

TEST_CASE("grid-accelerated peel is identical to the exhaustive oracle") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  for (const std::set<int>& active :
       {std::set<int>{1}, std::set<int>{1, 2}}) {
    for (double depth : {0.0, 5.0, 12.0, 30.0, 60.0}) {
      PeelConfig config;
      config.depth_mm = depth;
      config.active_compartments = active;
      const PeelResult fast = peel(mesh, config);
      const PeelResult slow = peel_oracle(mesh, config);
      CHECK(fast.kept_tetra == slow.kept_tetra);
      CHECK(fast.removed_tetra == slow.removed_tetra);
      CHECK(fast.surface_nodes == slow.surface_nodes);
    }
  }
}

TEST_CASE("deeper peels keep subsets") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  PeelConfig config;
  config.active_compartments = {1};
  std::vector<int> prev;
  bool first = true;
  for (double depth : {0.0, 10.0, 25.0, 45.0}) {
    config.depth_mm = depth;
    const PeelResult result = peel(mesh, config);
    if (!first) {
      // kept(deeper) must be a subset of kept(shallower)
      CHECK(std::includes(prev.begin(), prev.end(),
                          result.kept_tetra.begin(),
                          result.kept_tetra.end()));
      CHECK(result.kept_tetra.size() <= prev.size());
    }
    prev = result.kept_tetra;
    first = false;
  }
}

TEST_CASE("depth zero still removes the surface-touching layer") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  PeelConfig config;
  config.depth_mm = 0.0;
  config.active_compartments = {1};
  const PeelResult result = peel(mesh, config);
  REQUIRE(!result.kept_tetra.empty());
  const std::set<int> surface(result.surface_nodes.begin(),
                              result.surface_nodes.end());
  for (int t : result.kept_tetra)
    for (int v : mesh.tetra[t]) CHECK(surface.count(v) == 0);
}

TEST_CASE("kept and removed partition the active set") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  PeelConfig config;
  config.depth_mm = 8.0;
  config.active_compartments = {1, 2};
  const PeelResult result = peel(mesh, config);
  std::vector<int> all;
  all.insert(all.end(), result.kept_tetra.begin(), result.kept_tetra.end());
  all.insert(all.end(), result.removed_tetra.begin(),
             result.removed_tetra.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());  // disjoint
  std::vector<int> active;
  for (int t = 0; t < mesh.tet_count(); ++t)
    if (config.active_compartments.count(mesh.labels[t])) active.push_back(t);
  CHECK(all == active);
}

TEST_CASE("an over-deep peel keeps nothing and is not an error") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  PeelConfig config;
  config.depth_mm = 500.0;
  config.active_compartments = {1};
  const PeelResult result = peel(mesh, config);
  CHECK(result.kept_tetra.empty());
  const EffectiveDepth depth = effective_depth(mesh, result);
  CHECK(depth.empty);
}

TEST_CASE("effective depth is at least the requested depth") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  PeelConfig config;
  config.active_compartments = {1};
  for (double requested : {0.0, 10.0, 20.0}) {
    config.depth_mm = requested;
    const PeelResult result = peel(mesh, config);
    if (result.kept_tetra.empty()) continue;
    const EffectiveDepth depth = effective_depth(mesh, result);
    CHECK_FALSE(depth.empty);
    CHECK(depth.value_mm >= requested);
  }
}

TEST_CASE("point grid min-distance equals direct scans bit for bit") {
  RandomSequence rng(71);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 300; ++i)
    cloud.emplace_back(rng.range(-40, 40), rng.range(-40, 40),
                       rng.range(-40, 40));
  const PointGrid grid(cloud, 7.5);
  for (int q = 0; q < 200; ++q) {
    const Vec3 query(rng.range(-80, 80), rng.range(-80, 80),
                     rng.range(-80, 80));
    double direct = 1e300;
    for (const Vec3& p : cloud)
      direct = std::min(direct, (p - query).norm());
    CHECK(grid.min_distance(query) == direct);  // exact, not approximate
  }
}
