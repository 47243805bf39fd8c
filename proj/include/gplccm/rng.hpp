#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace gplccm {

// Deterministic random source. Every run derives all of its randomness from
// one root seed through this class; the variate transforms are written out
// here instead of using std:: distributions because those are allowed to
// differ between standard libraries, and identical seeds must give
// bit-identical estimates everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller on fresh uniforms; no cached spare, so
  // the stream position is a pure function of the number of calls.
  double normal();
  double normal(double mean, double sd);

  // Unbiased integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);

  // Independent child stream. Forking the same slot twice gives the same
  // child, regardless of how much the parent has been consumed.
  Rng fork(std::uint64_t slot) const;

  std::uint64_t seed() const { return seed_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace gplccm
