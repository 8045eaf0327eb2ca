#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "vlmlens/errors.hpp"

namespace vlmlens {

// splitmix64 step: advances *state and returns a mixed 64-bit output.
// Used both as the main generator and as the seed-derivation mixer, so every
// stream in the project is reproducible from (seed, labels...) across platforms.
std::uint64_t splitmix64(std::uint64_t* state);

// Derives a child seed from a parent seed and an ordered list of labels.
// Distinct label sequences give independent streams; identical sequences give
// identical streams. This is what makes control renders bit-identical outside
// the edited cells: each cell's noise stream depends only on (seed, cell, purpose).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> labels);

// Deterministic PRNG. All sampling is hand-rolled (no std distributions) so
// output is bit-stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(&state_); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform();

  // Uniform integer in [0, n); rejection sampling, unbiased. Requires n > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller; caches the paired draw.
  double normal();

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace vlmlens
