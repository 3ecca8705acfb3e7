#include "surad/rng.hpp"

namespace surad {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t RngStream::mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

RngStream RngStream::keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) {
  std::uint64_t k = mix(seed + kGolden);
  k = mix(k ^ (a + kGolden));
  k = mix(k ^ (b + kGolden));
  k = mix(k ^ (c + kGolden));
  return RngStream(k);
}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::next_below(std::size_t n) {
  return static_cast<std::size_t>(next_double() * static_cast<double>(n)) % n;
}

}  // namespace surad
