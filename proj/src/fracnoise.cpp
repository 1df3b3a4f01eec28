#include "fracctrl/fracnoise.hpp"

#include <cmath>
#include <numbers>

#include "fracctrl/parallel.hpp"
#include "fracctrl/rng.hpp"

namespace fracctrl {

NoisePath sample_path(const InnovationSystem& sys, std::uint64_t seed) {
  NoisePath path;
  path.seed = seed;
  NormalStream normal(seed);
  path.innovations.resize(sys.horizon());
  for (Index n = 0; n < sys.horizon(); ++n) path.innovations(n) = normal();
  path.noise = sys.noise_from_innovations(path.innovations);
  return path;
}

namespace {

void fill_noise_and_prediction(const InnovationSystem& sys, NoiseEnsemble& ens) {
  const Index paths = ens.innovations.rows();
  const Index horizon = ens.innovations.cols();
  const auto beta = sys.beta().topLeftCorner(horizon, horizon);
  const auto gamma = sys.gamma().topLeftCorner(horizon, horizon);
  ens.noise.resize(paths, horizon);
  ens.prediction.resize(paths, horizon);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const auto row = static_cast<Index>(i);
    ens.noise.row(row).noalias() =
        ens.innovations.row(row) * beta.transpose().triangularView<Eigen::Upper>();
    ens.prediction.row(row).noalias() =
        ens.noise.row(row) * gamma.transpose().triangularView<Eigen::StrictlyUpper>();
  });
}

}  // namespace

NoiseEnsemble sample_ensemble(const InnovationSystem& sys, std::uint64_t master_seed,
                              Index paths) {
  if (paths < 1) throw DomainError("sample_ensemble: need at least one path");
  NoiseEnsemble ens;
  ens.master_seed = master_seed;
  ens.seeds.resize(static_cast<std::size_t>(paths));
  ens.innovations.resize(paths, sys.horizon());
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    ens.seeds[i] = seed;
    NormalStream normal(seed);
    for (Index n = 0; n < sys.horizon(); ++n)
      ens.innovations(static_cast<Index>(i), n) = normal();
  });
  fill_noise_and_prediction(sys, ens);
  return ens;
}

NoiseEnsemble ensemble_from_innovations(const InnovationSystem& sys, PathMatrix innovations) {
  if (innovations.cols() > sys.horizon()) {
    throw RangeError("ensemble_from_innovations: innovations longer than system horizon");
  }
  NoiseEnsemble ens;
  ens.innovations = std::move(innovations);
  ens.seeds.assign(static_cast<std::size_t>(ens.innovations.rows()), 0);
  fill_noise_and_prediction(sys, ens);
  return ens;
}

double gaussian_abs_moment(double m) {
  if (!(m > 0.0)) throw DomainError("gaussian_abs_moment: order must be positive");
  // Integer orders: E|Z|^m = (m-1)!! for even m, sqrt(2/pi) (m-1)!! for odd m.
  if (m == std::floor(m) && m <= 100.0) {
    const long order = static_cast<long>(m);
    double double_factorial = 1.0;
    for (long j = order - 1; j > 1; j -= 2) double_factorial *= static_cast<double>(j);
    if (order % 2 == 0) return double_factorial;
    return std::sqrt(2.0 / std::numbers::pi) * double_factorial;
  }
  return std::exp(0.5 * m * std::numbers::ln2 + std::lgamma(0.5 * (m + 1.0)) -
                  0.5 * std::log(std::numbers::pi));
}

}  // namespace fracctrl
