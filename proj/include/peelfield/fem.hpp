#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

#include "peelfield/mesh.hpp"

namespace peelfield {

// P1 Galerkin stiffness matrix of the conductivity-weighted Laplacian plus
// the mesh-boundary node set (kept so sensor attachment can be verified
// without the mesh at hand).  Symmetric, singular with a constant nullspace.
struct SystemMatrix {
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  std::vector<int> boundary_nodes;  // sorted outer-boundary node indices

  int size() const { return static_cast<int>(A.rows()); }
  bool is_boundary(int node) const;
};

struct SensorArray {
  std::vector<std::string> labels;    // unique
  std::vector<Vec3> positions;        // mm
  std::vector<int> attached_nodes;    // nearest outer-boundary node each

  int count() const { return static_cast<int>(positions.size()); }
  void validate() const;

  // Attaches every sensor to its nearest outer-boundary node.
  static SensorArray attach(const TetrahedralMesh& mesh,
                            const std::vector<std::string>& labels,
                            const std::vector<Vec3>& positions);
};

// Rows are per-sensor solutions t of A t = b (b: +1 at the attached node,
// -1/N everywhere), each mean-subtracted over nodes.
struct TransferMatrix {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> T;

  int sensor_count() const { return static_cast<int>(T.rows()); }
  int node_count() const { return static_cast<int>(T.cols()); }
};

// Sensors x (3 * n_sources); source i occupies columns 3i..3i+2 with
// Cartesian x/y/z unit-moment dipoles; columns are mean-free over sensors.
struct LeadField {
  Eigen::MatrixXd L;

  int sensor_count() const { return static_cast<int>(L.rows()); }
  int source_count() const { return static_cast<int>(L.cols()) / 3; }
  Eigen::Block<const Eigen::MatrixXd> source_block(int i) const {
    return L.block(0, 3 * i, L.rows(), 3);
  }
};

// Element conductivity sigma_T weighted grad-grad assembly over all elements.
// Throws on elements with volume < 1e-12 mm^3, naming the element.
SystemMatrix assemble_system(const TetrahedralMesh& mesh);

struct TransferOptions {
  double tol = 1e-9;         // relative residual per sensor
  int max_iter_factor = 10;  // iteration cap = factor * node count
};

// One conjugate-gradient solve per sensor, batched so the matrix streams
// once per iteration across all right-hand sides.  Iterates live in the
// mean-zero subspace; final residuals are verified against the true system.
TransferMatrix compute_transfer(const SystemMatrix& A,
                                const SensorArray& sensors,
                                const TransferOptions& options = {});

// L := T * D with every column's mean over sensors subtracted.
LeadField compose_leadfield(const TransferMatrix& T,
                            const Eigen::SparseMatrix<double>& D);

}  // namespace peelfield
