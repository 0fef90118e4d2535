#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "hts/matrix.hpp"

namespace hts {

// splitmix64 finalizer; used to derive independent sub-seeds from one global seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Sub-seed for a named random stream. All stochastic components (init, noise,
// dropout, leaf dropping, ...) draw their seed this way from the global seed,
// so each stream is reproducible independently of the others.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view stream) {
  return mix64(global_seed ^ fnv1a64(stream));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  int index(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Matrix gaussian_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.a) v = rng.normal();
  return m;
}

inline Matrix uniform_matrix(int rows, int cols, double lo, double hi, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.a) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace hts
