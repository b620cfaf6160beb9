#include "peelfield/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "peelfield/errors.hpp"

namespace peelfield {

namespace {

// Interface step for the coefficient pair expressed as at-radius values
// x = a r^n, y = b r^-(n+1): continuity of u gives x+y, continuity of the
// radial current gives sigma*(n x - (n+1) y).  `ratio` is sigma_from over
// sigma_to (the side being left over the side being entered).
void cross_interface(int n, double ratio, double& x, double& y) {
  const double sum = x + y;
  const double flux = ratio * (n * x - (n + 1) * y);
  x = ((n + 1) * sum + flux) / (2 * n + 1);
  y = (n * sum - flux) / (2 * n + 1);
}

}  // namespace

AnalyticSphereModel::AnalyticSphereModel(const ShellSpec& spec) : spec_(spec) {
  spec_.validate();
  const int shells = spec_.shell_count();
  const auto& rho = spec_.radii_mm;
  const auto& sigma = spec_.conductivities;

  gain_.resize(kMaxDegree);
  for (int n = 1; n <= kMaxDegree; ++n) {
    // Inward sweep from the outer Neumann surface down to the first
    // interface, tracking the admissible exterior-family pair (X, Y).
    double X = n + 1.0, Y = n;  // n X - (n+1) Y = 0 at r = R
    for (int k = shells - 1; k >= 1; --k) {
      // translate within shell k+1 from rho[k] down to rho[k-1]
      const double shrink = rho[k - 1] / rho[k];
      X *= std::pow(shrink, n);
      Y *= std::pow(1.0 / shrink, n + 1);
      const double scale = std::max(std::abs(X), std::abs(Y));
      if (scale > 0.0) {
        X /= scale;
        Y /= scale;
      }
      cross_interface(n, sigma[k] / sigma[k - 1], X, Y);
    }
    if (!(std::abs(Y) > 1e-300))
      throw NumericalError("analytic model: degenerate shell response");

    // Outward sweep with the singular part normalized to one at rho[0];
    // the sum at R is the per-degree surface gain.
    double x = X / Y, y = 1.0;
    for (int k = 1; k < shells; ++k) {
      cross_interface(n, sigma[k - 1] / sigma[k], x, y);
      const double grow = rho[k] / rho[k - 1];
      x *= std::pow(grow, n);
      y *= std::pow(1.0 / grow, n + 1);
    }
    gain_[n - 1] = x + y;
    if (!std::isfinite(gain_[n - 1]))
      throw NumericalError(
          "analytic model: series overflow (shell radius ratios too extreme)");
  }
}

void AnalyticSphereModel::factors(const Vec3& source, const Vec3& sensor,
                                  double* radial, double* tangential,
                                  Vec3* e_r_out, Vec3* e_t_out) const {
  const double rho1 = spec_.radii_mm.front();
  const double b = source.norm();
  if (b >= rho1)
    throw ConfigError("analytic model: source eccentricity >= 1");
  const double sigma1 = spec_.conductivities.front();

  // Frame: e_r along the source offset (any axis for a central dipole; the
  // result is frame-independent there), e_t toward the sensor in-plane.
  Vec3 e_r = b > 1e-12 ? Vec3(source / b) : Vec3(0, 0, 1);
  const Vec3 s_hat = sensor.normalized();
  const double c = std::clamp(e_r.dot(s_hat), -1.0, 1.0);
  Vec3 e_t = s_hat - c * e_r;
  const double t_norm = e_t.norm();
  if (t_norm > 1e-12)
    e_t /= t_norm;
  else
    e_t = std::abs(e_r.z()) < 0.9 ? e_r.cross(Vec3(0, 0, 1)).normalized()
                                  : e_r.cross(Vec3(1, 0, 0)).normalized();

  const double s_sin = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double base = 1.0 / (4.0 * M_PI * sigma1 * rho1 * rho1);
  const double ratio = b / rho1;

  // Legendre recursions (no Condon-Shortley phase: P_1^1 = sin(theta)).
  double p_prev = 1.0, p_cur = c;          // P_0, P_1
  double q_prev = 0.0, q_cur = s_sin;      // P_0^1, P_1^1
  double radial_sum = 0.0, tangential_sum = 0.0;
  double power = 1.0;  // (b/rho1)^(n-1)
  double prev_mag = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= kMaxDegree; ++n) {
    const double coeff = gain_[n - 1] * base * power;
    const double d_rad = coeff * n * p_cur;
    const double d_tan = coeff * q_cur;
    radial_sum += d_rad;
    tangential_sum += d_tan;

    const double mag = std::abs(d_rad) + std::abs(d_tan);
    const double scale =
        std::max(std::abs(radial_sum) + std::abs(tangential_sum), 1e-300);
    // two consecutive negligible terms: oscillating Legendre factors can
    // produce a single accidental near-zero term
    if (mag < kTermRtol * scale && prev_mag < kTermRtol * scale) break;
    prev_mag = mag;

    const double p_next = ((2 * n + 1) * c * p_cur - n * p_prev) / (n + 1);
    const double q_next = ((2 * n + 1) * c * q_cur - (n + 1) * q_prev) / n;
    p_prev = p_cur;
    p_cur = p_next;
    q_prev = q_cur;
    q_cur = q_next;
    power *= ratio;
  }

  *radial = radial_sum;
  *tangential = tangential_sum;
  if (e_r_out) *e_r_out = e_r;
  if (e_t_out) *e_t_out = e_t;
}

double AnalyticSphereModel::potential(const Vec3& source, const Vec3& moment,
                                      const Vec3& sensor) const {
  double radial = 0.0, tangential = 0.0;
  Vec3 e_r, e_t;
  factors(source, sensor, &radial, &tangential, &e_r, &e_t);
  return radial * moment.dot(e_r) + tangential * moment.dot(e_t);
}

LeadField analytic_sphere_leadfield(const ShellSpec& spec,
                                    const SensorArray& sensors,
                                    const SourceSpace& sources) {
  spec.validate();
  if (spec.shell_count() != 3)
    throw ConfigError("Ary model requires 3 shells");
  const AnalyticSphereModel model(spec);
  const double R = spec.outer_radius();

  std::vector<Vec3> sensor_points(sensors.count());
  for (int s = 0; s < sensors.count(); ++s) {
    const Vec3& p = sensors.positions[s];
    const double r = p.norm();
    if (!(r > 0.0))
      throw ConfigError("analytic model: sensor at the origin");
    sensor_points[s] = p * (R / r);
    if (std::abs(r - R) > 1.0)
      std::cerr << "warning: sensor " << sensors.labels[s] << " projected "
                << std::abs(r - R) << " mm onto the outer surface\n";
  }

  LeadField lead;
  lead.L.resize(sensors.count(), 3 * sources.count());
  for (int i = 0; i < sources.count(); ++i)
    for (int s = 0; s < sensors.count(); ++s) {
      double radial = 0.0, tangential = 0.0;
      Vec3 e_r, e_t;
      model.factors(sources.positions[i], sensor_points[s], &radial,
                    &tangential, &e_r, &e_t);
      const Vec3 value = radial * e_r + tangential * e_t;
      for (int c = 0; c < 3; ++c) lead.L(s, 3 * i + c) = value[c];
    }

  const Eigen::RowVectorXd mean = lead.L.colwise().mean();
  lead.L.rowwise() -= mean;
  return lead;
}

}  // namespace peelfield
