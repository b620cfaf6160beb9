#include <doctest.h>

#include <Eigen/Dense>

#include <set>

#include "peelfield/errors.hpp"
#include "peelfield/peel.hpp"
#include "peelfield/sources.hpp"
#include "support.hpp"

using namespace peelfield;

namespace {

PeelResult peel_active_depth0(const TetrahedralMesh& mesh) {
  PeelConfig config;
  config.depth_mm = 0.0;
  config.active_compartments = {1};
  return peel(mesh, config);
}

// Barycentric containment check independent of TetLocator.
bool inside_tet(const TetrahedralMesh& mesh, int t, const Vec3& p) {
  const auto& tet = mesh.tetra[t];
  Eigen::Matrix3d J;
  J.col(0) = mesh.nodes[tet[1]] - mesh.nodes[tet[0]];
  J.col(1) = mesh.nodes[tet[2]] - mesh.nodes[tet[0]];
  J.col(2) = mesh.nodes[tet[3]] - mesh.nodes[tet[0]];
  const Eigen::Vector3d bary = J.inverse() * (p - mesh.nodes[tet[0]]);
  const double b0 = 1.0 - bary.sum();
  const double tol = -1e-9;
  return bary.x() >= tol && bary.y() >= tol && bary.z() >= tol && b0 >= tol;
}

}  // namespace

TEST_CASE("placement: count near target and hosts inside the kept set") {
  const TetrahedralMesh& mesh = homogeneous_sphere_mesh();
  const PeelResult kept = peel_active_depth0(mesh);
  REQUIRE(!kept.kept_tetra.empty());
  const int target = 300;
  const SourceSpace sources = place_sources(mesh, kept, target);
  // the 2% goal may be unreachable on a discrete lattice; the achieved
  // count must still land in a sane band around the target
  CHECK(sources.count() >= static_cast<int>(0.8 * target));
  CHECK(sources.count() <= static_cast<int>(1.2 * target));

  const std::set<int> kept_set(kept.kept_tetra.begin(),
                               kept.kept_tetra.end());
  for (int i = 0; i < sources.count(); ++i) {
    CHECK(kept_set.count(sources.host_tetra[i]) == 1);
    CHECK(inside_tet(mesh, sources.host_tetra[i], sources.positions[i]));
  }
}

TEST_CASE("placement: single source works and is deterministic") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  const PeelResult kept = peel_active_depth0(mesh);
  const SourceSpace a = place_sources(mesh, kept, 1);
  const SourceSpace b = place_sources(mesh, kept, 1);
  REQUIRE(a.count() >= 1);
  REQUIRE(a.count() == b.count());
  for (int i = 0; i < a.count(); ++i)
    CHECK((a.positions[i] - b.positions[i]).norm() == 0.0);
}

TEST_CASE("placement on an empty kept set reports the peel") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  PeelConfig config;
  config.depth_mm = 500.0;
  config.active_compartments = {1};
  const PeelResult nothing = peel(mesh, config);
  CHECK_THROWS_WITH_AS(place_sources(mesh, nothing, 10),
                       "peeled source space is empty", ConfigError);
}

TEST_CASE("dipole enumeration on one element: six edgewise") {
  const TetrahedralMesh mesh = unit_tet_mesh();
  const auto dipoles = enumerate_hdiv_dipoles(mesh, {0});
  REQUIRE(dipoles.size() == 6);
  for (const auto& d : dipoles) {
    CHECK(d.kind == HdivDipole::Kind::kEdgewise);
    CHECK(d.node_a < d.node_b);
    CHECK(d.direction.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d.length_mm > 0.0);
    const Vec3 mid =
        0.5 * (mesh.nodes[d.node_a] + mesh.nodes[d.node_b]);
    CHECK((d.position - mid).norm() <= 1e-14);
  }
}

TEST_CASE("dipole enumeration on a face-sharing pair: 9 edges + 1 crosser") {
  const TetrahedralMesh mesh = two_tet_mesh();
  const auto dipoles = enumerate_hdiv_dipoles(mesh, {0, 1});
  int edgewise = 0, crossing = 0;
  std::set<std::pair<int, int>> pairs;
  for (const auto& d : dipoles) {
    CHECK(pairs.emplace(d.node_a, d.node_b).second);  // deduplicated
    if (d.kind == HdivDipole::Kind::kEdgewise)
      ++edgewise;
    else
      ++crossing;
  }
  CHECK(edgewise == 9);
  CHECK(crossing == 1);
  // the crosser joins the two apexes opposite the shared face
  for (const auto& d : dipoles)
    if (d.kind == HdivDipole::Kind::kFaceIntersecting) {
      CHECK(d.node_a == 0);
      CHECK(d.node_b == 4);
    }
}

TEST_CASE("face-intersecting dipoles never cross out of the kept set") {
  const TetrahedralMesh& mesh = homogeneous_sphere_mesh();
  const PeelResult kept = peel_active_depth0(mesh);
  const auto dipoles = enumerate_hdiv_dipoles(mesh, kept.kept_tetra);
  const std::set<int> kept_set(kept.kept_tetra.begin(),
                               kept.kept_tetra.end());
  std::set<int> kept_nodes;
  for (int t : kept.kept_tetra)
    for (int v : mesh.tetra[t]) kept_nodes.insert(v);
  for (const auto& d : dipoles) {
    CHECK(kept_set.count(d.host_tetra) == 1);
    CHECK(kept_nodes.count(d.node_a) == 1);
    CHECK(kept_nodes.count(d.node_b) == 1);
  }
}

TEST_CASE("PBO: moment reproduction, zero column sums, locality") {
  const TetrahedralMesh& mesh = homogeneous_sphere_mesh();
  const PeelResult kept = peel_active_depth0(mesh);
  const SourceSpace sources = place_sources(mesh, kept, 80);
  const auto dipoles = enumerate_hdiv_dipoles(mesh, kept.kept_tetra);
  const InterpolationMatrix D = build_interpolation_pbo(dipoles, sources, mesh);

  REQUIRE(D.cols() == 3 * sources.count());

  for (int col = 0; col < D.cols(); ++col) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[col % 3] = 1.0;
    double column_sum = 0.0;
    int nonzeros = 0;
    for (InterpolationMatrix::InnerIterator it(D, col); it; ++it) {
      column_sum += it.value();
      ++nonzeros;
    }
    CHECK(std::abs(column_sum) <= 1e-12);
    CHECK(nonzeros <= 60);

    // Moment audit from the monopole loads directly: since each column's
    // loads sum to zero, its dipole moment is sum of load * node position,
    // which must reproduce the requested Cartesian unit moment.
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
    for (InterpolationMatrix::InnerIterator it(D, col); it; ++it)
      moment += it.value() * mesh.nodes[it.row()];
    CHECK((moment - e).norm() <= 1e-10);
  }
}

TEST_CASE("PBO: source at a dipole midpoint favours the aligned dipole") {
  const TetrahedralMesh mesh = two_tet_mesh();
  const auto dipoles = enumerate_hdiv_dipoles(mesh, {0, 1});
  // use the crossing dipole's midpoint as the source position
  const HdivDipole* crosser = nullptr;
  for (const auto& d : dipoles)
    if (d.kind == HdivDipole::Kind::kFaceIntersecting) crosser = &d;
  REQUIRE(crosser != nullptr);
  SourceSpace sources;
  sources.positions = {crosser->position};
  sources.host_tetra = {crosser->host_tetra};
  const InterpolationMatrix D = build_interpolation_pbo(dipoles, sources, mesh);
  // reproduced moment along the crosser direction
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();
  const int col = 0;  // x-component column
  for (InterpolationMatrix::InnerIterator it(D, col); it; ++it)
    moment += it.value() * mesh.nodes[it.row()];
  CHECK((moment - Eigen::Vector3d::UnitX()).norm() <= 1e-10);
}

TEST_CASE("PBO: degenerate candidate directions are reported") {
  // A single element whose candidates are artificially restricted cannot
  // happen through the public API (6 edges always span 3D), so check the
  // guard by feeding a dipole list collapsed onto one line.
  const TetrahedralMesh mesh = unit_tet_mesh();
  auto dipoles = enumerate_hdiv_dipoles(mesh, {0});
  for (auto& d : dipoles) d.direction = Vec3(1, 0, 0);  // break the span
  SourceSpace sources;
  sources.positions = {mesh.tet_centroid(0)};
  sources.host_tetra = {0};
  CHECK_THROWS_AS(build_interpolation_pbo(dipoles, sources, mesh),
                  NumericalError);
}

TEST_CASE("locator finds hosts and rejects outside points") {
  const TetrahedralMesh& mesh = small_sphere_mesh();
  std::vector<int> all(mesh.tet_count());
  for (int t = 0; t < mesh.tet_count(); ++t) all[t] = t;
  const TetLocator locator(mesh, all);
  for (int t = 0; t < mesh.tet_count(); t += 97) {
    const int found = locator.locate(mesh.tet_centroid(t));
    REQUIRE(found >= 0);
    CHECK(inside_tet(mesh, found, mesh.tet_centroid(t)));
  }
  CHECK(locator.locate(Vec3(500, 500, 500)) == -1);
}
