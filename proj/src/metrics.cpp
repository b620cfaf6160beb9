#include "peelfield/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "peelfield/errors.hpp"

namespace peelfield {

namespace {

void check_shapes(const LeadField& L_n, const LeadField& L_a) {
  if (L_n.L.rows() != L_a.L.rows() || L_n.L.cols() != L_a.L.cols())
    throw ConfigError("lead field shapes differ");
  if (L_n.L.cols() % 3 != 0) throw ConfigError("lead field columns not a multiple of 3");
}

void push_pair(ForwardComparison& out, const Eigen::VectorXd& vn,
               const Eigen::VectorXd& va, int source) {
  const double nn = vn.norm();
  const double na = va.norm();
  if (nn <= 0.0 || na <= 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "source %d has zero lead-field norm; cannot compare", source);
    throw NumericalError(buf);
  }
  out.rdm.push_back((vn / nn - va / na).norm());
  out.mag.push_back(std::abs(1.0 - na / nn));
}

}  // namespace

ForwardComparison rdm_mag(const LeadField& L_n, const LeadField& L_a) {
  check_shapes(L_n, L_a);
  const int n_src = static_cast<int>(L_n.L.cols()) / 3;
  const int rows = static_cast<int>(L_n.L.rows());
  ForwardComparison out;
  out.rdm.reserve(n_src);
  out.mag.reserve(n_src);
  Eigen::VectorXd vn(3 * rows), va(3 * rows);
  for (int s = 0; s < n_src; ++s) {
    // Stack the three Cartesian columns into one long vector so one scalar
    // pair (RDM, MAG) summarizes the whole dipole response.
    for (int c = 0; c < 3; ++c) {
      vn.segment(c * rows, rows) = L_n.L.col(3 * s + c);
      va.segment(c * rows, rows) = L_a.L.col(3 * s + c);
    }
    push_pair(out, vn, va, s);
  }
  return out;
}

ForwardComparison rdm_mag_directed(const LeadField& L_n, const LeadField& L_a,
                                   const std::vector<Eigen::Vector3d>& dirs) {
  check_shapes(L_n, L_a);
  const int n_src = static_cast<int>(L_n.L.cols()) / 3;
  if (static_cast<int>(dirs.size()) != n_src)
    throw ConfigError("direction count does not match source count");
  ForwardComparison out;
  out.rdm.reserve(n_src);
  out.mag.reserve(n_src);
  for (int s = 0; s < n_src; ++s) {
    const Eigen::VectorXd vn = L_n.source_block(s) * dirs[s];
    const Eigen::VectorXd va = L_a.source_block(s) * dirs[s];
    push_pair(out, vn, va, s);
  }
  return out;
}

LocalisationError localisation_error(const Vec3& true_pos,
                                     const Reconstruction& recon,
                                     const SourceSpace& sources) {
  if (recon.argmax < 0 ||
      recon.argmax >= static_cast<int>(sources.positions.size()))
    throw ConfigError("reconstruction argmax outside source space");
  const double raw = (true_pos - sources.positions[recon.argmax]).norm();
  LocalisationError err;
  err.raw_mm = raw;
  err.scaled_mm = raw / std::sqrt(3.0);
  return err;
}

Dispersion spatial_dispersion(const Reconstruction& recon,
                              const SourceSpace& sources, int center_index,
                              double roi_mm) {
  const int n_src = static_cast<int>(sources.positions.size());
  if (center_index < 0 || center_index >= n_src)
    throw ConfigError("dispersion center outside source space");
  if (static_cast<int>(recon.moments.size()) != n_src)
    throw ConfigError("reconstruction does not match source space");
  const Vec3 center = sources.positions[center_index];
  double wsum = 0.0;
  double wd2 = 0.0;
  for (int s = 0; s < n_src; ++s) {
    const double d = (sources.positions[s] - center).norm();
    if (d > roi_mm) continue;
    const double w = recon.moments[s].squaredNorm();
    wsum += w;
    wd2 += w * d * d;
  }
  Dispersion out;
  if (wsum <= 0.0) {
    out.degenerate = true;
    out.sd_mm = 0.0;
    return out;
  }
  out.sd_mm = std::sqrt(wd2 / wsum);
  return out;
}

int outlier_count(const std::vector<double>& deltas, double mu_ref,
                  double sigma_ref) {
  const double threshold = mu_ref + 2.0 * sigma_ref;
  int count = 0;
  for (double d : deltas)
    if (d > threshold) ++count;
  return count;
}

OutlierReference cuffin_reference(double snr_db) {
  // Published single-dipole localisation errors in a three-shell sphere,
  // used as the outlier yardstick for simulated trials.
  struct Row {
    double snr, mu, sigma;
  };
  static const Row kTable[] = {
      {5.0, 10.3, 5.3},  {10.0, 10.4, 5.4}, {15.0, 10.3, 4.6},
      {20.0, 10.6, 4.1}, {25.0, 10.2, 3.7}, {30.0, 9.8, 3.6},
  };
  for (const Row& r : kTable)
    if (std::abs(r.snr - snr_db) < 1e-9) return {r.mu, r.sigma};
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "no reference localisation error tabulated for %.1f dB",
                snr_db);
  throw ConfigError(buf);
}

SampleStats sample_stats(const std::vector<double>& values) {
  SampleStats st;
  st.count = static_cast<int>(values.size());
  if (st.count == 0) return st;
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / st.count;
  if (st.count < 2) return st;
  double ss = 0.0;
  for (double v : values) {
    const double d = v - st.mean;
    ss += d * d;
  }
  st.stddev = std::sqrt(ss / (st.count - 1));
  return st;
}

}  // namespace peelfield
