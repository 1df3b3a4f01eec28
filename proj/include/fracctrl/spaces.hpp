#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracctrl/errors.hpp"
#include "fracctrl/types.hpp"

namespace fracctrl {

/// delta_n = 1 - (n+2)^{-theta}, theta > 1, n >= 1.
template <typename Scalar = double>
Scalar delta_term(Scalar theta, long n) {
  if (!(theta > Scalar(1))) throw DomainError("delta_term: theta must exceed 1");
  if (n < 1) throw DomainError("delta_term: index must be >= 1");
  using std::pow;
  return Scalar(1) - pow(Scalar(n + 2), -theta);
}

/// Closed-form lower bound on lim_n prod_{i<=n} delta_i:
/// exp(2^{1-theta}/(1-theta) + 2^{1-2theta}/(1-2theta)).
template <typename Scalar = double>
Scalar product_lower_bound(Scalar theta) {
  if (!(theta > Scalar(1))) throw DomainError("product_lower_bound: theta must exceed 1");
  using std::exp;
  using std::pow;
  return exp(pow(Scalar(2), Scalar(1) - theta) / (Scalar(1) - theta) +
             pow(Scalar(2), Scalar(1) - Scalar(2) * theta) / (Scalar(1) - Scalar(2) * theta));
}

/// The sequence delta_n = 1 - (n+2)^{-theta} and its running products
/// S_n = prod_{i=1}^n delta_i. Products are accumulated in log space.
template <typename Scalar = double>
class DeltaVector {
 public:
  explicit DeltaVector(Scalar theta) : theta_(theta) {
    if (!(theta > Scalar(1))) throw DomainError("DeltaVector: theta must exceed 1");
  }

  Scalar theta() const noexcept { return theta_; }
  Scalar term(long n) const { return delta_term(theta_, n); }

  /// log S_n; log S_0 = 0.
  Scalar log_running_product(long n) const {
    Scalar acc(0);
    using std::log1p;
    using std::pow;
    for (long i = 1; i <= n; ++i) acc += log1p(-pow(Scalar(i + 2), -theta_));
    return acc;
  }

  Scalar running_product(long n) const {
    using std::exp;
    return exp(log_running_product(n));
  }

  /// log S_0, ..., log S_n in one pass.
  std::vector<Scalar> log_running_products(long n) const {
    std::vector<Scalar> out(static_cast<std::size_t>(n + 1));
    using std::log1p;
    using std::pow;
    Scalar acc(0);
    out[0] = acc;
    for (long i = 1; i <= n; ++i) {
      acc += log1p(-pow(Scalar(i + 2), -theta_));
      out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
  }

  Scalar limit_lower_bound() const { return product_lower_bound(theta_); }

 private:
  Scalar theta_;
};

/// Exponent schedule of a weighted norm.
///   forward:    |X_n|^{base * delta_1 ... delta_n}
///   backward:   |Y_n|^{base / (delta_1 ... delta_n)}
///   unweighted: |X_n|^{base}
enum class NormDirection { Forward, Backward, Unweighted };

struct WeightedNormParams {
  double lambda = 1.0;
  double gamma_exp = 2.0;   // discount e^{-lambda n^gamma_exp}
  double base_power = 2.0;  // 2a (forward) or 2b (backward)
  double theta = 2.0;       // delta-vector parameter
  NormDirection direction = NormDirection::Forward;

  void validate() const {
    if (!(lambda > 0.0)) throw DomainError("weighted norm: lambda must be positive");
    if (!(gamma_exp > 1.0)) throw DomainError("weighted norm: discount exponent must exceed 1");
    if (!(base_power >= 2.0)) throw DomainError("weighted norm: base power must be >= 2");
    if (direction != NormDirection::Unweighted && !(theta > 1.0))
      throw DomainError("weighted norm: theta must exceed 1");
  }
};

/// Compatibility a |delta|^2 >= b >= 1 between forward (2a) and backward (2b) exponents,
/// using the closed-form lower bound for |delta|.
inline bool exponents_compatible(double a, double b, double theta) {
  const double d = product_lower_bound(theta);
  return a * d * d >= b && b >= 1.0;
}

/// e^{-lambda n^gamma_exp}.
template <typename Scalar = double>
Scalar discount(Scalar lambda, Scalar gamma_exp, long n) {
  using std::exp;
  using std::pow;
  return exp(-lambda * pow(Scalar(n), gamma_exp));
}

/// Exponents p(0..N) used by the norm at each index.
inline std::vector<double> norm_exponents(const WeightedNormParams& params, long horizon) {
  std::vector<double> p(static_cast<std::size_t>(horizon + 1), params.base_power);
  if (params.direction == NormDirection::Unweighted) return p;
  const auto logs = DeltaVector<double>(params.theta).log_running_products(horizon);
  const double sign = params.direction == NormDirection::Forward ? 1.0 : -1.0;
  for (std::size_t n = 0; n < p.size(); ++n) p[n] = params.base_power * std::exp(sign * logs[n]);
  return p;
}

struct NormReport {
  double value = 0.0;      // sum_{n=0}^{N} e^{-lambda n^gamma} mean |X_n|^{p(n)}
  double last_term = 0.0;  // the n = N summand, for tail diagnostics
  std::vector<double> terms;
};

/// log of the empirical mean of |x|^p, computed without forming |x|^p. Returns -inf when every
/// entry is zero.
template <typename Derived>
double log_mean_abs_power(const Eigen::MatrixBase<Derived>& x, double p) {
  double peak = -HUGE_VAL;
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(static_cast<double>(x(i)));
    if (a > 0.0) peak = std::max(peak, p * std::log(a));
  }
  if (peak == -HUGE_VAL) return peak;
  double sum = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(static_cast<double>(x(i)));
    if (a > 0.0) sum += std::exp(p * std::log(a) - peak);
  }
  return peak + std::log(sum) - std::log(static_cast<double>(x.size()));
}

/// Truncated weighted norm of an ensemble (rows = paths, columns = time 0..N).
/// Expectations are empirical means over the rows; each summand is evaluated in log space.
template <typename Derived>
NormReport weighted_norm(const Eigen::MatrixBase<Derived>& paths, const WeightedNormParams& params,
                         long horizon) {
  params.validate();
  if (paths.rows() == 0 || paths.cols() == 0) throw DomainError("weighted_norm: empty path");
  if (horizon < 0) throw DomainError("weighted_norm: truncation must be non-negative");
  if (paths.cols() < horizon + 1)
    throw RangeError("weighted_norm: path shorter than truncation + 1");

  const auto powers = norm_exponents(params, horizon);
  NormReport report;
  report.terms.resize(static_cast<std::size_t>(horizon + 1));
  for (long n = 0; n <= horizon; ++n) {
    const double log_mean = log_mean_abs_power(paths.col(n), powers[static_cast<std::size_t>(n)]);
    double term = 0.0;
    if (log_mean > -HUGE_VAL) {
      term = std::exp(-params.lambda * std::pow(static_cast<double>(n), params.gamma_exp) + log_mean);
    }
    report.terms[static_cast<std::size_t>(n)] = term;
    report.value += term;
  }
  report.last_term = report.terms.back();
  return report;
}

}  // namespace fracctrl
