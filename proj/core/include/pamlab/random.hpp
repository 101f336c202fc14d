#pragma once

#include <cstdint>

namespace pamlab {

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic key for a (seed, a, b, c) counter tuple.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0);

// Counter-based generator: the n-th draw is a pure function of (key, n), so
// draws never depend on scheduling. Normals use Box-Muller in pairs.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  double uniform();  // in (0, 1)
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// One standard normal from a single key.
double keyed_normal(std::uint64_t key);

}  // namespace pamlab
