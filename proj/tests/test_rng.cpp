#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "peelfield/rng.hpp"

using namespace peelfield;

TEST_CASE("streams are reproducible and frozen") {
  // Golden values pin the exact output so published study tables stay
  // byte-identical across refactors and toolchains.
  RandomStream s(42);
  CHECK(s.next_u64() == 0x09bc585a244823f2ULL);
  CHECK(s.next_u64() == 0xde4431fa3c80db06ULL);
  CHECK(s.next_u64() == 0x37e9671c45376d5dULL);
  CHECK(s.next_u64() == 0xccf635ee9e9e2fa4ULL);

  RandomStream sub(42, 7, 9, 1);
  CHECK(sub.next_u64() == 0x32a0ce8d65451835ULL);
  CHECK(sub.next_u64() == 0x09088315e19fb72bULL);

  // replaying a stream reproduces everything, including the Box-Muller spare
  RandomStream a(123, 4, 5, 6), b(123, 4, 5, 6);
  for (int i = 0; i < 64; ++i) {
    CHECK(a.next_normal() == b.next_normal());
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("substreams separated by one identifier word do not collide") {
  RandomStream a(9001, 1, 0, 0), b(9001, 2, 0, 0), c(9001, 1, 1, 0);
  int collisions = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    const std::uint64_t vb = b.next_u64();
    const std::uint64_t vc = c.next_u64();
    if (va == vb || va == vc || vb == vc) ++collisions;
  }
  CHECK(collisions == 0);
}

TEST_CASE("uniform draws live in the half-open unit interval") {
  RandomStream s(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have unit variance to sampling accuracy") {
  RandomStream s(20240817);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.next_normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("scaled noise matches its target standard deviation within 2%") {
  // the noise model draws unit normals and scales by 10^(-snr/20); at
  // 20 dB that is 0.1
  const double scale = std::pow(10.0, -20.0 / 20.0);
  RandomStream s(5150, 3, 1, 0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = scale * s.next_normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(sd == doctest::Approx(0.1).epsilon(0.02));
}

TEST_CASE("Box-Muller pairs satisfy the radius identity") {
  RandomStream s(88), twin(88);
  const double u1 = twin.next_uniform();
  const double n1 = s.next_normal();
  const double n2 = s.next_normal();
  CHECK(n1 * n1 + n2 * n2 ==
        doctest::Approx(-2.0 * std::log(u1)).epsilon(1e-12));
}

TEST_CASE("directions are unit length and cover the sphere evenly") {
  RandomStream s(31337);
  const int n = 2000;
  double mx = 0.0, my = 0.0, mz = 0.0;
  int pos_x = 0;
  for (int i = 0; i < n; ++i) {
    double d[3];
    s.next_direction(d);
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    CHECK(std::abs(norm - 1.0) <= 1e-12);
    mx += d[0];
    my += d[1];
    mz += d[2];
    if (d[0] > 0.0) ++pos_x;
  }
  const double drift =
      std::sqrt(mx * mx + my * my + mz * mz) / n;
  CHECK(drift < 0.05);
  CHECK(pos_x > static_cast<int>(0.45 * n));
  CHECK(pos_x < static_cast<int>(0.55 * n));
}
