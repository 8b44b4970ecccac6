#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "circuit.hpp"
#include "random.hpp"

namespace reccirc {

struct SymmetryWitness {
  std::vector<std::size_t> permutation;  // applied to the permuted slots
  std::vector<double> input;
  std::vector<double> aux;
};

struct SymmetryResult {
  bool ok = true;
  std::optional<SymmetryWitness> witness;
  explicit operator bool() const { return ok; }
};

namespace detail {

inline SymmetryResult sample_symmetry(const ExtendedCircuit& c, std::size_t trials, std::uint64_t seed,
                                      std::size_t first_permuted) {
  Evaluator ev(c);
  Rng rng(seed);
  const std::size_t n = c.n();
  std::vector<double> x(n), y(n), a(c.l());
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : x) v = rng.chance(0.5) ? static_cast<double>(rng.integer(-4, 4)) : rng.real(-3, 3);
    for (auto& v : a) v = static_cast<double>(rng.integer(-3, 3));
    std::vector<std::size_t> perm = rng.permutation(n - std::min(n, first_permuted));
    if (perm.size() >= 2 && t == 0) std::swap(perm[0], perm[1]);  // always try a plain swap first
    y = x;
    for (std::size_t i = 0; i < perm.size(); ++i) y[first_permuted + i] = x[first_permuted + perm[i]];
    std::vector<double> ox, oy;
    try {
      ox = ev(x, a).outputs;
      oy = ev(y, a).outputs;
    } catch (const EvalError&) {
      continue;  // outside the representable range; not evidence either way
    }
    if (!close(ox, oy)) return {false, SymmetryWitness{perm, x, a}};
  }
  return {};
}

}  // namespace detail

/// Sampled check that every output is invariant under permutations of all inputs.
inline SymmetryResult check_symmetric_sampled(const ExtendedCircuit& c, std::size_t trials,
                                              std::uint64_t seed) {
  return detail::sample_symmetry(c, trials, seed, 0);
}

/// As above, with input 0 pinned.
inline SymmetryResult check_tail_symmetric_sampled(const ExtendedCircuit& c, std::size_t trials,
                                                   std::uint64_t seed) {
  return detail::sample_symmetry(c, trials, seed, 1);
}

}  // namespace reccirc
