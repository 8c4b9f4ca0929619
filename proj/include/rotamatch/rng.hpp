#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace rotamatch {

// Deterministic random stream. The engine is std::mt19937_64 (fully specified
// by the standard); all value mappings are explicit here so that sequences are
// reproducible bit-for-bit across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derives an independent stream from a root seed and a path of indices,
  // e.g. derive(seed, {kStreamScenes, pair_id}). Streams for distinct paths
  // are decorrelated via splitmix64 folding.
  static Rng derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t s = splitmix(seed);
    for (uint64_t p : path) s = splitmix(s ^ splitmix(p + 0x9e3779b97f4a7c15ULL));
    return Rng(s);
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n).
  uint64_t index(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags for Rng::derive paths; keeps seed wiring auditable.
enum StreamTag : uint64_t {
  kStreamScene = 1,
  kStreamKeypoints = 2,
  kStreamRotation = 3,
  kStreamBatch = 4,
  kStreamInit = 5,
  kStreamEval = 6,
  kStreamRansac = 7,
};

}  // namespace rotamatch
