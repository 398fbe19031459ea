#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fewshot {

/// SplitMix64 output function (Steele, Lea & Flood). Used for seed mixing.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Episode seed of run `run_index` under `global_seed`:
///   seed_run = splitmix64(global_seed XOR splitmix64(run_index))
constexpr std::uint64_t derive_run_seed(std::uint64_t global_seed, std::uint64_t run_index) noexcept {
  return splitmix64(global_seed ^ splitmix64(run_index));
}

/// Portable random source. The engine is the standard MT19937-64, whose
/// output sequence is fixed by the C++ standard; the distributions are
/// implemented here because std:: distributions differ between vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal (Marsaglia polar method, one value per accepted pair).
  double normal();

  /// Gamma(shape, 1) by Marsaglia & Tsang; shape < 1 uses the U^(1/a) boost.
  double gamma(double shape);

  /// Symmetric Dirichlet(concentration) sample of length `n`.
  std::vector<double> dirichlet(std::size_t n, double concentration);

 private:
  std::mt19937_64 engine_;
};

}  // namespace fewshot
