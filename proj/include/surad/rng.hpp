#pragma once

#include <cstdint>
#include <cstddef>

namespace surad {

// Counter-based random stream. Every (seed, id...) tuple owns an independent
// reproducible sequence, so parallel consumers are keyed by (step, slot)
// instead of sharing one sequential generator. splitmix64 underneath.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  static std::uint64_t mix(std::uint64_t x);

  static RngStream keyed(std::uint64_t seed, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_double();

  // Uniform integer in [0, n); n must be positive.
  std::size_t next_below(std::size_t n);

 private:
  std::uint64_t state_;
};

}  // namespace surad
