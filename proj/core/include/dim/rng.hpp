#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace dim {

// Seeded generator with a fixed normal-draw algorithm (Box-Muller on two
// uniforms, no cached spare) so streams replay identically after a state
// round-trip and across standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform(), u2 = uniform();
    u1 = u1 <= 0.0 ? 5e-324 : u1;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // n in [1, n_max]
  int64_t uniform_int(int64_t n_max) {
    return 1 + static_cast<int64_t>(uniform() * static_cast<double>(n_max)) %
                   n_max;
  }

  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dim
