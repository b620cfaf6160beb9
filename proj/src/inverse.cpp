#include "peelfield/inverse.hpp"

#include <algorithm>
#include <cmath>

#include "peelfield/errors.hpp"

namespace peelfield {

void Measurement::center() {
  if (values.size() == 0) throw ConfigError("measurement: empty");
  values.array() -= values.mean();
  mean_free = true;
}

void Measurement::require_mean_free() const {
  if (!mean_free)
    throw ConfigError("measurement: mean-free flag not set");
  const double scale = values.cwiseAbs().maxCoeff();
  if (std::abs(values.mean()) > 1e-12 * std::max(scale, 1e-300))
    throw ConfigError("measurement: marked mean-free but mean is not zero");
}

namespace {

int lowest_argmax(const Eigen::VectorXd& scores) {
  int best = 0;
  for (int i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;  // strict: first max wins
  return best;
}

}  // namespace

SloretaSolver::SloretaSolver(const LeadField& L, double snr_db) : L_(L.L) {
  const int sensors = L.sensor_count();
  if (sensors == 0 || L.source_count() == 0)
    throw ConfigError("sloreta: empty lead field");

  lambda_ = std::pow(10.0, -snr_db / 10.0) * L_.squaredNorm() / sensors;
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_))
    throw NumericalError("sloreta: regularization parameter is not positive");

  Eigen::MatrixXd G = L_ * L_.transpose();
  G.diagonal().array() += lambda_;
  llt_.compute(G);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("sloreta: Gram matrix factorization failed");

  // Per-source 3x3 resolution blocks S_i = L_i^T G^-1 L_i, one batched
  // solve for all columns.  Standardizing the triplets by S_i^{-1/2} rather
  // than by entry keeps the noiseless single-dipole argmax exact; eigenvalue
  // directions the sensors cannot see are dropped, pseudo-inverse style.
  const Eigen::MatrixXd Z = llt_.solve(L_);
  const int n_sources = L.source_count();
  standardizers_.reserve(n_sources);
  for (int i = 0; i < n_sources; ++i) {
    Eigen::Matrix3d S =
        L_.middleCols(3 * i, 3).transpose() * Z.middleCols(3 * i, 3);
    S = 0.5 * (S + S.transpose().eval());  // symmetrize roundoff
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(S);
    const double cutoff =
        std::max(1e-30, 1e-12 * eig.eigenvalues().maxCoeff());
    Eigen::Matrix3d inv_sqrt = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k)
      if (eig.eigenvalues()[k] > cutoff)
        inv_sqrt += eig.eigenvectors().col(k) *
                    eig.eigenvectors().col(k).transpose() /
                    std::sqrt(eig.eigenvalues()[k]);
    standardizers_.push_back(inv_sqrt);
  }
}

Reconstruction SloretaSolver::apply(const Measurement& M) const {
  M.require_mean_free();
  if (M.sensor_count() != L_.rows())
    throw ConfigError("sloreta: measurement size does not match lead field");

  const Eigen::VectorXd y = llt_.solve(M.values);
  const Eigen::VectorXd J = L_.transpose() * y;

  const int n_sources = static_cast<int>(L_.cols()) / 3;
  Reconstruction recon;
  recon.method = "sloreta";
  recon.parameter = lambda_;
  recon.moments.resize(n_sources);
  recon.scores.resize(n_sources);
  for (int i = 0; i < n_sources; ++i) {
    const Eigen::Vector3d s = standardizers_[i] * J.segment<3>(3 * i);
    recon.moments[i] = s;
    recon.scores[i] = s.norm();
  }
  recon.argmax = lowest_argmax(recon.scores);
  return recon;
}

Reconstruction sloreta(const LeadField& L, const Measurement& M,
                       double snr_db) {
  return SloretaSolver(L, snr_db).apply(M);
}

DipoleScanSolver::DipoleScanSolver(const LeadField& L, double trunc_rtol)
    : trunc_rtol_(trunc_rtol), sensor_count_(L.sensor_count()) {
  if (!(trunc_rtol >= 0.0 && trunc_rtol < 1.0))
    throw ConfigError("dipole scan: trunc_rtol must be in [0, 1)");
  const int n_sources = L.source_count();
  if (sensor_count_ == 0 || n_sources == 0)
    throw ConfigError("dipole scan: empty lead field");

  filters_.reserve(n_sources);
  blocks_.reserve(n_sources);
  for (int i = 0; i < n_sources; ++i) {
    const Eigen::MatrixXd block = L.source_block(i);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        block, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = trunc_rtol_ * sv[0];
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (int k = 0; k < sv.size(); ++k)
      if (sv[k] > cutoff && sv[k] > 0.0) inv[k] = 1.0 / sv[k];
    filters_.push_back(svd.matrixV() * inv.asDiagonal() *
                       svd.matrixU().transpose());
    blocks_.push_back(block);
  }
}

Reconstruction DipoleScanSolver::apply(const Measurement& M) const {
  M.require_mean_free();
  if (M.sensor_count() != sensor_count_)
    throw ConfigError("dipole scan: measurement size does not match lead field");
  const double m_norm2 = M.values.squaredNorm();
  if (!(m_norm2 > 0.0))
    throw ConfigError("RRV undefined for zero measurement");

  const int n_sources = static_cast<int>(filters_.size());
  Reconstruction recon;
  recon.method = "dipole_scan";
  recon.parameter = trunc_rtol_;
  recon.moments.resize(n_sources);
  recon.scores.resize(n_sources);
  for (int i = 0; i < n_sources; ++i) {
    const Eigen::Vector3d moment = filters_[i] * M.values;
    // the filter realizes an orthogonal projection, so RRV is in [0, 1] up
    // to roundoff; clamp so the goodness of fit honors its range
    const double rrv = std::clamp(
        (M.values - blocks_[i] * moment).squaredNorm() / m_norm2, 0.0, 1.0);
    recon.moments[i] = moment;
    recon.scores[i] = 1.0 - rrv;  // goodness of fit
  }
  recon.argmax = lowest_argmax(recon.scores);
  return recon;
}

Reconstruction dipole_scan(const LeadField& L, const Measurement& M,
                           double trunc_rtol) {
  return DipoleScanSolver(L, trunc_rtol).apply(M);
}

}  // namespace peelfield
