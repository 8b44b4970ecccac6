#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace reccirc {

/// Seeded generator with platform-stable draws (mt19937_64 output is fully
/// specified; the helpers below avoid the implementation-defined std
/// distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform integer in [lo, hi].
  long long integer(long long lo, long long hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long long>(eng_() % span);
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double real(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool chance(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

  /// Derive an independent stream, e.g. one per trial.
  Rng fork(std::uint64_t salt) { return Rng(eng_() ^ (salt * 0x9E3779B97F4A7C15ULL)); }

  /// Stream for trial `t` of a run seeded with `seed`; independent of the
  /// order in which trials execute.
  static Rng for_trial(std::uint64_t seed, std::uint64_t t) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (t + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace reccirc
