#include "peelfield/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include "peelfield/errors.hpp"

namespace peelfield {

bool SystemMatrix::is_boundary(int node) const {
  return std::binary_search(boundary_nodes.begin(), boundary_nodes.end(),
                            node);
}

void SensorArray::validate() const {
  if (labels.size() != positions.size() ||
      attached_nodes.size() != positions.size())
    throw ConfigError("sensors: label/position/attachment sizes differ");
  std::set<std::string> seen;
  for (const auto& label : labels)
    if (!seen.insert(label).second)
      throw ConfigError("sensors: duplicate label '" + label + "'");
}

SensorArray SensorArray::attach(const TetrahedralMesh& mesh,
                                const std::vector<std::string>& labels,
                                const std::vector<Vec3>& positions) {
  if (labels.size() != positions.size())
    throw ConfigError("sensors: label and position counts differ");
  std::set<int> all_labels(mesh.labels.begin(), mesh.labels.end());
  const SurfaceMesh boundary = extract_surface(mesh, all_labels);
  SensorArray sensors;
  sensors.labels = labels;
  sensors.positions = positions;
  sensors.attached_nodes.reserve(positions.size());
  for (const auto& p : positions)
    sensors.attached_nodes.push_back(nearest_surface_node(boundary, mesh, p));
  sensors.validate();
  return sensors;
}

SystemMatrix assemble_system(const TetrahedralMesh& mesh) {
  const int n = mesh.node_count();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.tet_count()) * 16);

  for (int t = 0; t < mesh.tet_count(); ++t) {
    const auto& tet = mesh.tetra[t];
    const Vec3& x0 = mesh.nodes[tet[0]];
    Eigen::Matrix3d J;
    J.col(0) = mesh.nodes[tet[1]] - x0;
    J.col(1) = mesh.nodes[tet[2]] - x0;
    J.col(2) = mesh.nodes[tet[3]] - x0;
    const double volume = J.determinant() / 6.0;
    if (volume < 1e-12) {
      std::ostringstream msg;
      msg << "assemble: element " << t << " is degenerate (volume " << volume
          << " mm^3)";
      throw NumericalError(msg.str());
    }
    // gradients of the barycentric basis: rows of J^-1 for vertices 1..3,
    // minus their sum for vertex 0
    const Eigen::Matrix3d Jinv = J.inverse();
    Vec3 grad[4];
    grad[1] = Jinv.row(0);
    grad[2] = Jinv.row(1);
    grad[3] = Jinv.row(2);
    grad[0] = -(grad[1] + grad[2] + grad[3]);

    const double sigma_v = mesh.conductivity_of(t) * volume;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        triplets.emplace_back(tet[a], tet[b],
                              sigma_v * grad[a].dot(grad[b]));
  }

  SystemMatrix system;
  system.A.resize(n, n);
  system.A.setFromTriplets(triplets.begin(), triplets.end());
  system.A.makeCompressed();

  std::set<int> all_labels(mesh.labels.begin(), mesh.labels.end());
  system.boundary_nodes = extract_surface(mesh, all_labels).surface_node_set;
  return system;
}

namespace {

using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic,
                              Eigen::RowMajor>;
using ColScalars = Eigen::Array<double, 1, Eigen::Dynamic>;

// subtract each column's mean: keeps iterates in the mean-zero subspace
void center_columns(RowArray& block) {
  const ColScalars mean = block.colwise().mean();
  block.rowwise() -= mean;
}

}  // namespace

TransferMatrix compute_transfer(const SystemMatrix& system,
                                const SensorArray& sensors,
                                const TransferOptions& options) {
  sensors.validate();
  const int n = system.size();
  const int s = sensors.count();
  if (s == 0) throw ConfigError("transfer: no sensors");
  for (int k = 0; k < s; ++k) {
    const int node = sensors.attached_nodes[k];
    if (node < 0 || node >= n)
      throw ConfigError("transfer: sensor " + sensors.labels[k] +
                        " attached to out-of-range node");
    if (!system.is_boundary(node))
      throw ConfigError("transfer: sensor " + sensors.labels[k] +
                        " attached node " + std::to_string(node) +
                        " is not on the boundary");
  }

  // Right-hand sides: +1 at the attached node, -1/N everywhere (mean-zero,
  // so the singular Neumann system is compatible).
  RowArray B = RowArray::Constant(n, s, -1.0 / n);
  for (int k = 0; k < s; ++k) B(sensors.attached_nodes[k], k) += 1.0;
  center_columns(B);

  Eigen::ArrayXd diag_inv(n);
  for (int i = 0; i < n; ++i) {
    const double d = system.A.coeff(i, i);
    if (!(d > 0.0))
      throw NumericalError("transfer: non-positive diagonal at node " +
                           std::to_string(i));
    diag_inv[i] = 1.0 / d;
  }

  // One CG per sensor, advanced in lockstep so A streams through memory once
  // per iteration for all right-hand sides.
  RowArray X = RowArray::Zero(n, s);
  RowArray R = B;
  RowArray Z = R.colwise() * diag_inv;
  center_columns(Z);
  RowArray P = Z;
  RowArray AP(n, s);
  ColScalars rz = (R * Z).colwise().sum();
  const ColScalars b_norm = B.matrix().colwise().norm().array().max(1e-300);

  const long max_iter =
      std::max<long>(1, static_cast<long>(options.max_iter_factor) * n);
  double worst_rel = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (long iter = 0; iter < max_iter && !converged; ++iter) {
    AP.matrix().noalias() = system.A * P.matrix();
    const ColScalars pap = (P * AP).colwise().sum();
    // a column with vanishing curvature has effectively converged; freeze it
    const ColScalars alpha =
        (pap > 0.0).select(rz / pap.max(1e-300), ColScalars::Zero(s));
    X += P.rowwise() * alpha;
    R -= AP.rowwise() * alpha;
    if ((iter & 31) == 31) center_columns(R);  // counter roundoff drift

    const ColScalars rel = R.matrix().colwise().norm().array() / b_norm;
    worst_rel = rel.maxCoeff();
    if (worst_rel <= options.tol) {
      // verify against the unprojected system before declaring victory
      R = B - (system.A * X.matrix()).array();
      const ColScalars true_rel =
          R.matrix().colwise().norm().array() / b_norm;
      worst_rel = true_rel.maxCoeff();
      if (worst_rel <= options.tol) {
        converged = true;
        break;
      }
      // refresh the Krylov process from the true residual
      Z = R.colwise() * diag_inv;
      center_columns(Z);
      P = Z;
      rz = (R * Z).colwise().sum();
      continue;
    }

    Z = R.colwise() * diag_inv;
    center_columns(Z);
    const ColScalars rz_new = (R * Z).colwise().sum();
    const ColScalars beta =
        (rz > 0.0).select(rz_new / rz.max(1e-300), ColScalars::Zero(s));
    P = Z + P.rowwise() * beta;
    rz = rz_new;
  }

  if (!converged) {
    std::ostringstream msg;
    msg << "transfer: CG did not reach tol " << options.tol << " within "
        << max_iter << " iterations (worst relative residual " << worst_rel
        << ")";
    throw NumericalError(msg.str());
  }

  TransferMatrix transfer;
  transfer.T = X.matrix().transpose();
  const Eigen::VectorXd row_mean = transfer.T.rowwise().mean();
  transfer.T.colwise() -= row_mean;
  return transfer;
}

LeadField compose_leadfield(const TransferMatrix& transfer,
                            const Eigen::SparseMatrix<double>& D) {
  if (transfer.node_count() != D.rows())
    throw ConfigError("leadfield: T columns (" +
                      std::to_string(transfer.node_count()) +
                      ") do not match D rows (" + std::to_string(D.rows()) +
                      ")");
  LeadField lead;
  lead.L = transfer.T * D;
  const Eigen::RowVectorXd mean = lead.L.colwise().mean();
  lead.L.rowwise() -= mean;
  return lead;
}

}  // namespace peelfield
