#pragma once

#include <cstdint>
#include <random>

namespace fracctrl {

/// SplitMix64 finalizer. Used to turn (master seed, stream id) into independent engine seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for stream `stream` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Acklam's rational approximation of the standard normal quantile, refined by one
/// Halley step against std::erfc. Accurate to ~1e-15 on (0,1).
double normal_quantile(double p);

/// Deterministic stream of N(0,1) draws.
///
/// Engine: std::mt19937_64 (bit-exact across standard libraries), seeded with derive_seed.
/// Uniforms take the top 53 bits of each output, shifted by half an ulp into the open interval
/// (0,1); normals are produced by inverse CDF, one uniform per draw. std::normal_distribution is
/// avoided because its algorithm is implementation-defined.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform();
  double operator()() { return normal_quantile(uniform()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fracctrl
