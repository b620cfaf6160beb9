#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "peelfield/fem.hpp"

namespace peelfield {

struct Measurement {
  Eigen::VectorXd values;  // per-sensor potentials
  bool mean_free = false;

  int sensor_count() const { return static_cast<int>(values.size()); }
  // Subtracts the mean and sets the flag.
  void center();
  void require_mean_free() const;  // throws unless centered to 1e-12 rel
};

struct Reconstruction {
  std::string method;                       // "sloreta" | "dipole_scan"
  double parameter = 0.0;                   // lambda or trunc_rtol
  std::vector<Eigen::Vector3d> moments;     // per source
  Eigen::VectorXd scores;                   // >= 0; method-specific
  int argmax = -1;                          // lowest index on ties

  int source_count() const { return static_cast<int>(scores.size()); }
};

// sLORETA with SNR-scaled Tikhonov regularization:
// lambda = 10^(-snr_db/10) * trace(L L^T) / n_sensors.  Each source triplet
// of the initial solution L^T (L L^T + lambda I)^-1 M is standardized by the
// inverse square root of its 3x3 resolution-matrix block (the form with the
// exact single-dipole localisation guarantee in the noiseless limit); scores
// are the standardized triplet norms.
Reconstruction sloreta(const LeadField& L, const Measurement& M,
                       double snr_db);

// Per-position truncated-SVD scan: W(x) = pseudoinverse of the 3-column
// block dropping singular values below trunc_rtol * sigma_max; score is the
// goodness of fit 1 - ||M - L_x W M||^2 / ||M||^2.
Reconstruction dipole_scan(const LeadField& L, const Measurement& M,
                           double trunc_rtol = 1e-6);

// Factored forms for inverting many measurements against one lead field.
class SloretaSolver {
 public:
  SloretaSolver(const LeadField& L, double snr_db);
  Reconstruction apply(const Measurement& M) const;
  double lambda() const { return lambda_; }

 private:
  const Eigen::MatrixXd L_;
  double lambda_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::vector<Eigen::Matrix3d> standardizers_;  // S_i^{-1/2} per source
};

class DipoleScanSolver {
 public:
  DipoleScanSolver(const LeadField& L, double trunc_rtol = 1e-6);
  Reconstruction apply(const Measurement& M) const;

 private:
  double trunc_rtol_;
  int sensor_count_;
  std::vector<Eigen::MatrixXd> filters_;  // W(x), 3 x sensors
  std::vector<Eigen::MatrixXd> blocks_;   // L_x, sensors x 3
};

}  // namespace peelfield
