#ifndef ZIPS_RANDOM_HPP
#define ZIPS_RANDOM_HPP

#include <cstdint>
#include <random>

namespace zips {

// A reproducible pseudo-random stream. Streams are identified by a
// (seed, stream id) pair; distinct ids give statistically independent
// sequences, so chains and generator blocks each own one.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();
  bool bernoulli(double p);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Mixes a seed and an index into a new 64-bit seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace zips

#endif  // ZIPS_RANDOM_HPP
