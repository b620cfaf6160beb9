#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "peelfield/errors.hpp"
#include "peelfield/inverse.hpp"
#include "support.hpp"

using namespace peelfield;

namespace {

// Random lead field with mean-free columns, the gauge the pipeline produces.
LeadField synthetic_lead(int sensors, int sources, RandomSequence& seq) {
  LeadField lf;
  lf.L.resize(sensors, 3 * sources);
  for (int r = 0; r < sensors; ++r)
    for (int c = 0; c < 3 * sources; ++c) lf.L(r, c) = seq.range(-1.0, 1.0);
  const Eigen::RowVectorXd mean = lf.L.colwise().mean();
  lf.L.rowwise() -= mean;
  return lf;
}

Measurement from_block(const LeadField& lf, int source,
                       const Eigen::Vector3d& d) {
  Measurement m;
  m.values = lf.source_block(source) * d;
  m.center();
  return m;
}

}  // namespace

TEST_CASE("measurement centering and the mean-free contract") {
  Measurement m;
  m.values = Eigen::Vector4d(1.0, 2.0, 3.0, 4.0);
  CHECK_THROWS_WITH_AS(m.require_mean_free(),
                       "measurement: mean-free flag not set", ConfigError);
  m.center();
  CHECK(m.mean_free);
  CHECK(std::abs(m.values.mean()) <= 1e-15);
  CHECK_NOTHROW(m.require_mean_free());

  Measurement lying;
  lying.values = Eigen::Vector3d(1.0, 1.0, 2.0);
  lying.mean_free = true;
  CHECK_THROWS_WITH_AS(lying.require_mean_free(),
                       "measurement: marked mean-free but mean is not zero",
                       ConfigError);

  Measurement empty;
  CHECK_THROWS_WITH_AS(empty.center(), "measurement: empty", ConfigError);
}

TEST_CASE("dipole scan recovers a measurement inside a block's span") {
  RandomSequence seq(2024);
  const LeadField lf = synthetic_lead(8, 5, seq);
  const Eigen::Vector3d d(0.4, -1.1, 0.7);
  const Measurement m = from_block(lf, 3, d);

  const Reconstruction recon = dipole_scan(lf, m, 1e-6);
  CHECK(recon.method == "dipole_scan");
  CHECK(recon.parameter == 1e-6);
  REQUIRE(recon.source_count() == 5);
  CHECK(recon.argmax == 3);
  CHECK(recon.scores[3] >= 1.0 - 1e-12);  // residual variance at the truth
  CHECK((recon.moments[3] - d).norm() <= 1e-8 * d.norm());
  for (int i = 0; i < 5; ++i) {
    CHECK(recon.scores[i] >= 0.0);
    CHECK(recon.scores[i] <= 1.0);
    if (i != 3) CHECK(recon.scores[i] < recon.scores[3]);
  }
}

TEST_CASE("dipole scan scores an orthogonal block at zero") {
  // Orthonormal directions inside the mean-zero subspace so centering is a
  // no-op and the span geometry is exact.
  const int sensors = 8;
  RandomSequence seq(7);
  Eigen::MatrixXd Q(sensors, 6);
  for (int c = 0; c < 6; ++c) {
    Eigen::VectorXd v(sensors);
    for (int r = 0; r < sensors; ++r) v[r] = seq.range(-1.0, 1.0);
    v.array() -= v.mean();
    for (int p = 0; p < c; ++p) v -= Q.col(p).dot(v) * Q.col(p);
    REQUIRE(v.norm() > 1e-6);
    Q.col(c) = v / v.norm();
  }

  LeadField lf;
  lf.L.resize(sensors, 6);
  lf.L.leftCols(3) = Q.leftCols(3);
  lf.L.rightCols(3) = Q.rightCols(3);

  Measurement m;
  m.values = Q.col(3) + 0.5 * Q.col(4);
  m.center();

  const Reconstruction recon = dipole_scan(lf, m, 1e-6);
  CHECK(recon.argmax == 1);
  CHECK(recon.scores[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(recon.scores[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(recon.moments[0].norm() <= 1e-13);
}

TEST_CASE("goodness of fit complements the relative residual variance") {
  RandomSequence seq(99);
  const LeadField lf = synthetic_lead(10, 7, seq);
  Measurement m;
  m.values.resize(10);
  for (int r = 0; r < 10; ++r) m.values[r] = seq.range(-2.0, 2.0);
  m.center();

  const Reconstruction recon = dipole_scan(lf, m, 1e-6);
  for (int i = 0; i < recon.source_count(); ++i) {
    const double rrv =
        (m.values - lf.source_block(i) * recon.moments[i]).squaredNorm() /
        m.values.squaredNorm();
    CHECK(recon.scores[i] == doctest::Approx(1.0 - rrv).epsilon(1e-12));
  }
}

TEST_CASE("ties resolve to the lowest source index") {
  RandomSequence seq(11);
  LeadField lf = synthetic_lead(9, 6, seq);
  lf.L.middleCols(3 * 4, 3) = lf.L.middleCols(3 * 1, 3);  // duplicate block

  const Measurement m = from_block(lf, 1, Eigen::Vector3d(1.0, -0.3, 0.2));
  const Reconstruction recon = dipole_scan(lf, m, 1e-6);
  CHECK(recon.scores[1] == recon.scores[4]);
  CHECK(recon.argmax == 1);
}

TEST_CASE("rank-deficient blocks are truncated rather than inverted") {
  const int sensors = 12;
  RandomSequence seq(41);
  Eigen::VectorXd a(sensors), b(sensors), c(sensors);
  for (int r = 0; r < sensors; ++r) {
    a[r] = seq.range(-1.0, 1.0);
    b[r] = seq.range(-1.0, 1.0);
    c[r] = seq.range(-1.0, 1.0);
  }
  a.array() -= a.mean();
  b.array() -= b.mean();
  c.array() -= c.mean();

  LeadField lf;
  lf.L.resize(sensors, 3);
  lf.L.col(0) = a;
  lf.L.col(1) = b;
  lf.L.col(2) = a + b + 1e-9 * c;  // third singular value ~1e-9

  Measurement m;
  m.values = a + 2.0 * b + 0.3 * c;
  m.center();

  const Reconstruction safe = dipole_scan(lf, m, 1e-6);
  const Reconstruction raw = dipole_scan(lf, m, 0.0);
  CHECK(safe.moments[0].norm() < 100.0 * m.values.norm());
  CHECK(raw.moments[0].norm() > 1e4 * safe.moments[0].norm());

  // an exactly repeated column must not produce infinities either way
  lf.L.col(2) = a;
  const Reconstruction exact = dipole_scan(lf, m, 0.0);
  CHECK(exact.moments[0].allFinite());
  CHECK(std::isfinite(exact.scores[0]));
}

TEST_CASE("sloreta regularization follows the SNR rule") {
  RandomSequence seq(5);
  const LeadField lf = synthetic_lead(12, 8, seq);
  for (double snr : {5.0, 20.0}) {
    const SloretaSolver solver(lf, snr);
    const double want =
        std::pow(10.0, -snr / 10.0) * lf.L.squaredNorm() / lf.sensor_count();
    CHECK(solver.lambda() == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("sloreta localizes exact single-source data") {
  RandomSequence seq(123);
  const LeadField lf = synthetic_lead(16, 12, seq);
  const Eigen::Vector3d d(0.8, 0.1, -0.6);
  for (int truth : {0, 5, 11}) {
    const Measurement m = from_block(lf, truth, d);
    const Reconstruction recon = sloreta(lf, m, 20.0);
    CHECK(recon.method == "sloreta");
    REQUIRE(recon.source_count() == 12);
    CHECK(recon.argmax == truth);
  }
}

TEST_CASE("sloreta output scales linearly with the measurement") {
  RandomSequence seq(321);
  const LeadField lf = synthetic_lead(10, 6, seq);
  Measurement m = from_block(lf, 2, Eigen::Vector3d(0.5, 0.5, -1.0));
  Measurement m3;
  m3.values = 3.0 * m.values;
  m3.mean_free = true;

  const Reconstruction r1 = sloreta(lf, m, 15.0);
  const Reconstruction r3 = sloreta(lf, m3, 15.0);
  CHECK(r1.argmax == r3.argmax);
  for (int i = 0; i < r1.source_count(); ++i)
    CHECK(r3.scores[i] == doctest::Approx(3.0 * r1.scores[i]).epsilon(1e-12));
}

TEST_CASE("inverse solvers validate their inputs") {
  RandomSequence seq(8);
  const LeadField lf = synthetic_lead(8, 4, seq);

  LeadField empty;
  empty.L.resize(0, 0);
  Measurement m = from_block(lf, 0, Eigen::Vector3d(1, 0, 0));
  CHECK_THROWS_AS(sloreta(empty, m, 20.0), ConfigError);
  CHECK_THROWS_AS(dipole_scan(empty, m, 1e-6), ConfigError);
  CHECK_THROWS_WITH_AS(dipole_scan(lf, m, 1.0),
                       "dipole scan: trunc_rtol must be in [0, 1)",
                       ConfigError);

  Measurement wrong;
  wrong.values = Eigen::VectorXd::Zero(5);
  wrong.values[0] = 1.0;
  wrong.center();
  CHECK_THROWS_AS(sloreta(lf, wrong, 20.0), ConfigError);
  CHECK_THROWS_AS(dipole_scan(lf, wrong, 1e-6), ConfigError);

  // a constant trace centers to zero: no residual variance is defined
  Measurement flat;
  flat.values = Eigen::VectorXd::Constant(8, 4.2);
  flat.center();
  CHECK_THROWS_WITH_AS(dipole_scan(lf, flat, 1e-6),
                       "RRV undefined for zero measurement", ConfigError);

  // sloreta on zero data degrades to all-zero scores, lowest-index argmax
  const Reconstruction zero = sloreta(lf, flat, 20.0);
  CHECK(zero.scores.maxCoeff() == 0.0);
  CHECK(zero.argmax == 0);
}
