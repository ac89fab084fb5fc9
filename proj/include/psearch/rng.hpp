#ifndef PSEARCH_RNG_HPP_
#define PSEARCH_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

namespace psearch {

// Seeded generator owned by the caller. The engine is mt19937_64, whose output
// sequence is fixed by the standard; the distributions below are implemented
// here because the standard library ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1), 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

  // k distinct values from [0, n) in draw order (partial Fisher-Yates).
  std::vector<int> sample_distinct(int n, int k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Independent generator for a named sub-stream.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace psearch

#endif  // PSEARCH_RNG_HPP_
