#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace avi {

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based seeding: the stream for (seed, stream, counter) does not depend
// on how many values any other stream consumed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    // 53-bit mantissa draw; std::uniform_real_distribution is not portable.
    const double u = static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * u;
  }
  int uniform_int(int lo, int hi_inclusive) {
    const auto span = static_cast<std::uint64_t>(hi_inclusive - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace avi
