#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "gesturelab/error.hpp"

namespace gesturelab {

// FNV-1a over arbitrary byte sequences. Seed derivation hashes the global
// seed together with a role string and integer context (sample index, epoch,
// view id, ...) so every random decision has a self-contained stream that
// does not depend on evaluation order. This is what makes training resumable
// and reruns byte-identical.
class SeedHash {
 public:
  SeedHash() = default;

  SeedHash& mix(uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffu;
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }

  SeedHash& mix(std::string_view s) {
    for (unsigned char c : s) {
      state_ ^= c;
      state_ *= 0x100000001b3ull;
    }
    // Separator byte so ("ab","c") and ("a","bc") hash differently.
    state_ ^= 0xffu;
    state_ *= 0x100000001b3ull;
    return *this;
  }

  uint64_t value() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ull;
};

inline uint64_t derive_seed(uint64_t root, std::string_view role) {
  return SeedHash().mix(root).mix(role).value();
}

inline uint64_t derive_seed(uint64_t root, std::string_view role, uint64_t a) {
  return SeedHash().mix(root).mix(role).mix(a).value();
}

inline uint64_t derive_seed(uint64_t root, std::string_view role, uint64_t a, uint64_t b) {
  return SeedHash().mix(root).mix(role).mix(a).mix(b).value();
}

inline uint64_t derive_seed(uint64_t root, std::string_view role, std::string_view name) {
  return SeedHash().mix(root).mix(role).mix(name).value();
}

inline uint64_t derive_seed(uint64_t root, std::string_view role, std::string_view name,
                            uint64_t a) {
  return SeedHash().mix(root).mix(role).mix(name).mix(a).value();
}

inline uint64_t derive_seed(uint64_t root, std::string_view role, std::string_view name,
                            uint64_t a, uint64_t b) {
  return SeedHash().mix(root).mix(role).mix(name).mix(a).mix(b).value();
}

// splitmix64: tiny, fast, and fully specified here so streams are identical
// on every platform (std::mt19937 would be too, but distributions are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection.
  int64_t uniform_int(int64_t n) {
    check_arg(n > 0, "uniform_int requires n > 0");
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<int64_t>(v % un);
  }

  // Box-Muller, cached second draw. Avoids std::normal_distribution so the
  // stream is implementation-independent.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  bool coin(double p_true) { return uniform() < p_true; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  template <class T>
  std::vector<T> sample_without_replacement(const std::vector<T>& pool, size_t k) {
    check_arg(k <= pool.size(), "sample_without_replacement: k exceeds pool size");
    std::vector<T> copy = pool;
    // Partial Fisher-Yates: first k slots are the sample.
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(uniform_int(static_cast<int64_t>(copy.size() - i)));
      std::swap(copy[i], copy[j]);
    }
    copy.resize(k);
    return copy;
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace gesturelab
