#include "zips/random.hpp"

#include <array>

namespace zips {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  const std::uint64_t mixed = mix_seed(seed, stream_id);
  std::array<std::uint32_t, 4> words{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

double RandomStream::uniform() {
  // 53 random mantissa bits; never returns 1.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_open() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double RandomStream::normal() { return normal_(engine_); }

bool RandomStream::bernoulli(double p) { return uniform() < p; }

}  // namespace zips
