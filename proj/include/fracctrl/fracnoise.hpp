#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracctrl/errors.hpp"
#include "fracctrl/types.hpp"

namespace fracctrl {

/// Hurst index of the driving fractional Brownian motion, 0 < H < 1.
class HurstParam {
 public:
  explicit HurstParam(double h) : h_(h) {
    if (!(h > 0.0 && h < 1.0)) {
      throw DomainError("Hurst parameter must lie in (0,1), got " + std::to_string(h));
    }
  }

  double value() const noexcept { return h_; }
  /// H = 1/2: increments are independent standard normals.
  bool is_white() const noexcept { return h_ == 0.5; }

 private:
  double h_;
};

/// Autocovariance of unit-step fractional Gaussian noise,
/// rho_H(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2.
template <typename Scalar = double>
Scalar fgn_autocovariance(const HurstParam& hurst, long lag) {
  if (lag < 0) throw DomainError("fgn_autocovariance: lag must be non-negative");
  if (lag == 0) return Scalar(1);
  if (hurst.is_white()) return Scalar(0);
  using std::pow;
  const Scalar two_h = Scalar(2) * Scalar(hurst.value());
  const Scalar k = Scalar(lag);
  return Scalar(0.5) * (pow(k + 1, two_h) - Scalar(2) * pow(k, two_h) + pow(k - 1, two_h));
}

/// Toeplitz covariance of (xi_0, ..., xi_{N-1}).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> fgn_covariance(const HurstParam& hurst,
                                                                     Index horizon) {
  if (horizon < 1) throw DomainError("fgn_covariance: horizon must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rho(horizon);
  for (Index k = 0; k < horizon; ++k) rho(k) = fgn_autocovariance<Scalar>(hurst, k);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov(horizon, horizon);
  for (Index i = 0; i < horizon; ++i)
    for (Index j = 0; j < horizon; ++j) cov(i, j) = rho(std::abs(i - j));
  return cov;
}

/// Lower Cholesky factor with explicit pivot reporting. Throws NumericalError carrying the
/// index of the first non-positive pivot.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> cholesky_lower(
    const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index n = a.rows();
  if (a.cols() != n) throw DomainError("cholesky_lower: matrix must be square");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> l =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    Scalar pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > Scalar(0))) {
      throw NumericalError("Cholesky factorization failed: non-positive pivot at index " +
                               std::to_string(j),
                           j);
    }
    using std::sqrt;
    l(j, j) = sqrt(pivot);
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

/// Innovation representation of fractional Gaussian noise on a finite horizon.
///
/// With xi = (xi_0, ..., xi_{N-1}) and Cov(xi) = beta * beta^T (beta lower triangular,
/// positive diagonal), the innovations eta = alpha * xi, alpha = beta^{-1}, are iid N(0,1) and
/// eta_n is the normalized residual of xi_n after projecting on xi_0..xi_{n-1}.
///
/// The information available at step n is F_n = sigma(xi_0, ..., xi_{n-1}). The one-step
/// predictor E[xi_n | F_n] = sum_{k<n} gamma(n,k) xi_k with
/// gamma(n,k) = sum_{l<n} beta(n,l) alpha(l,k).
///
/// Immutable after construction; safe to share between threads.
template <typename Scalar>
class BasicInnovationSystem {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicInnovationSystem(const HurstParam& hurst, Index horizon)
      : hurst_(hurst), covariance_(fgn_covariance<Scalar>(hurst, horizon)) {
    beta_ = cholesky_lower(covariance_);
    alpha_ = beta_.template triangularView<Eigen::Lower>().solve(
        Matrix::Identity(horizon, horizon));
    alpha_.template triangularView<Eigen::StrictlyUpper>().setZero();
    // gamma(n,.) = beta(n, 0:n) * alpha(0:n, :), restricted to k < n.
    gamma_ = Matrix::Zero(horizon, horizon);
    for (Index n = 1; n < horizon; ++n) {
      gamma_.row(n).head(n) =
          beta_.row(n).head(n) *
          alpha_.topLeftCorner(n, n).template triangularView<Eigen::Lower>();
    }
  }

  const HurstParam& hurst() const noexcept { return hurst_; }
  Index horizon() const noexcept { return covariance_.rows(); }

  const Matrix& covariance() const noexcept { return covariance_; }
  const Matrix& beta() const noexcept { return beta_; }
  const Matrix& alpha() const noexcept { return alpha_; }
  /// Strictly lower triangular prediction matrix, gamma()(n,k) = gamma(n,k).
  const Matrix& gamma() const noexcept { return gamma_; }

  Scalar beta(Index n, Index k) const { return beta_(n, k); }
  Scalar alpha(Index n, Index k) const { return alpha_(n, k); }
  Scalar gamma(Index n, Index k) const { return gamma_(n, k); }

  /// E[xi_n | xi_0..xi_{n-1}] where n = prefix.size().
  Scalar predict_next(std::span<const Scalar> prefix) const {
    const auto n = static_cast<Index>(prefix.size());
    if (n >= horizon()) {
      throw RangeError("predict_next: prefix of length " + std::to_string(n) +
                       " needs horizon > " + std::to_string(n));
    }
    if (n == 0) return Scalar(0);
    Eigen::Map<const Vector> past(prefix.data(), n);
    return gamma_.row(n).head(n).dot(past);
  }

  /// xi = beta * eta.
  template <typename Derived>
  Vector noise_from_innovations(const Eigen::MatrixBase<Derived>& eta) const {
    const Index n = eta.size();
    return beta_.topLeftCorner(n, n).template triangularView<Eigen::Lower>() * eta;
  }

  /// eta = alpha * xi.
  template <typename Derived>
  Vector innovations_from_noise(const Eigen::MatrixBase<Derived>& xi) const {
    const Index n = xi.size();
    return alpha_.topLeftCorner(n, n).template triangularView<Eigen::Lower>() * xi;
  }

 private:
  HurstParam hurst_;
  Matrix covariance_;
  Matrix beta_;
  Matrix alpha_;
  Matrix gamma_;
};

using InnovationSystem = BasicInnovationSystem<double>;

/// Convenience factory matching build_innovation_system(H, N).
inline InnovationSystem build_innovation_system(const HurstParam& hurst, Index horizon) {
  if (horizon < 1) throw DomainError("build_innovation_system: horizon must be >= 1");
  return InnovationSystem(hurst, horizon);
}

/// One sampled trajectory: iid innovations and the correlated noise they generate.
struct NoisePath {
  std::uint64_t seed = 0;
  Eigen::VectorXd innovations;  // eta_0..eta_{N-1}
  Eigen::VectorXd noise;        // xi_0..xi_{N-1}
};

/// Samples eta iid N(0,1) from NormalStream(seed) and sets xi = beta * eta.
NoisePath sample_path(const InnovationSystem& sys, std::uint64_t seed);

/// A path ensemble. Path i is sample_path(sys, derive_seed(master_seed, i)), so ensembles of
/// different sizes share their leading paths.
struct NoiseEnsemble {
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  PathMatrix innovations;  // paths x N
  PathMatrix noise;        // paths x N
  PathMatrix prediction;   // paths x N, E[xi_n | F_n]

  Index paths() const noexcept { return noise.rows(); }
  Index horizon() const noexcept { return noise.cols(); }
  std::span<const double> noise_prefix(Index path, Index n) const {
    return {noise.data() + path * noise.cols(), static_cast<std::size_t>(n)};
  }
};

NoiseEnsemble sample_ensemble(const InnovationSystem& sys, std::uint64_t master_seed,
                              Index paths);

/// Builds an ensemble from given innovations (rows = paths); xi and predictions are derived.
NoiseEnsemble ensemble_from_innovations(const InnovationSystem& sys, PathMatrix innovations);

/// E|Z|^m for Z ~ N(0,1): 2^{m/2} Gamma((m+1)/2) / sqrt(pi). Exact for integer m.
double gaussian_abs_moment(double m);

}  // namespace fracctrl
