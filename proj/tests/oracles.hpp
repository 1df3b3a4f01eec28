#pragma once

// Reference computations written without the library or Eigen, used as independent oracles.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double rho(double h, long k) {
  if (k == 0) return 1.0;
  const double e = 2.0 * h;
  const double kk = static_cast<double>(k);
  return 0.5 * (std::pow(kk + 1.0, e) - 2.0 * std::pow(kk, e) + std::pow(kk - 1.0, e));
}

/// Solves A x = b by Gaussian elimination with partial pivoting (A is n x n, row-major).
inline std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (a[piv][c] == 0.0) throw std::runtime_error("singular");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double m = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= m * a[c][k];
      b[r] -= m * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

inline std::vector<std::vector<double>> past_covariance(double h, std::size_t n) {
  std::vector<std::vector<double>> r(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r[i][j] = rho(h, std::labs(static_cast<long>(i) - static_cast<long>(j)));
  return r;
}

/// r^T R^{-1} xi for the Gaussian conditional mean of xi_n given xi_0..xi_{n-1}.
inline double conditional_mean(double h, const std::vector<double>& prefix) {
  const std::size_t n = prefix.size();
  if (n == 0) return 0.0;
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = rho(h, static_cast<long>(n - k));
  const auto w = solve(past_covariance(h, n), r);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += w[k] * prefix[k];
  return s;
}

/// sqrt(1 - r^T R^{-1} r).
inline double conditional_sd(double h, std::size_t n) {
  if (n == 0) return 1.0;
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = rho(h, static_cast<long>(n - k));
  const auto w = solve(past_covariance(h, n), r);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += w[k] * r[k];
  return std::sqrt(1.0 - s);
}

/// Y_n = c * sum_{j=n+1}^{N} e^{-lambda (j^g - n^g)}.
inline double constant_driver_y(double c, double lambda, double g, long N, long n) {
  double s = 0.0;
  for (long j = n + 1; j <= N; ++j) s += std::exp(-lambda * (std::pow(double(j), g) - std::pow(double(n), g)));
  return c * s;
}

/// Deterministic adjoint p by hand: p_N = 0,
/// p_n = e^{-l((n+1)^g - n^g)} (p_{n+1} (1 + bx(n+1)) - fx(n+1) k(n+1)).
template <typename Bx, typename Fx, typename K>
std::vector<double> adjoint_p(long N, double lambda, double g, Bx bx, Fx fx, K k) {
  std::vector<double> p(static_cast<std::size_t>(N + 1), 0.0);
  for (long n = N - 1; n >= 0; --n) {
    const double ratio = std::exp(-lambda * (std::pow(double(n + 1), g) - std::pow(double(n), g)));
    const double next = p[static_cast<std::size_t>(n + 1)];
    p[static_cast<std::size_t>(n)] = ratio * (next * (1.0 + bx(n + 1)) - fx(n + 1) * k(n + 1));
  }
  return p;
}

}  // namespace oracle
