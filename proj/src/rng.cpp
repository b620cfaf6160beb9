#include "peelfield/rng.hpp"

#include <cmath>

namespace peelfield {

double RandomStream::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

void RandomStream::next_direction(double out[3]) {
  for (;;) {
    const double x = 2.0 * next_uniform() - 1.0;
    const double y = 2.0 * next_uniform() - 1.0;
    const double z = 2.0 * next_uniform() - 1.0;
    const double n2 = x * x + y * y + z * z;
    if (n2 > 1e-12 && n2 <= 1.0) {
      const double inv = 1.0 / std::sqrt(n2);
      out[0] = x * inv;
      out[1] = y * inv;
      out[2] = z * inv;
      return;
    }
  }
}

}  // namespace peelfield
