#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fracctrl/fracnoise.hpp"
#include "fracctrl/spaces.hpp"
#include "fracctrl/types.hpp"

namespace fracctrl {

/// Scalar coefficients of X_{n+1} = X_n + b(n, X_n, u_n) + sigma(n, X_n, u_n) xi_n and their
/// first partials. Functions must be stateless (they are evaluated concurrently across paths).
struct CoefficientSet {
  using Fn = std::function<double(long n, double x, double u)>;
  Fn drift;
  Fn diffusion;
  Fn drift_x;
  Fn drift_u;
  Fn diffusion_x;
  Fn diffusion_u;
  /// Declared Lipschitz constant in (x, u).
  double lipschitz = 0.0;
};

/// Largest observed |db| + |dsigma| over |dx| + |du| on random point pairs drawn from
/// [x_lo, x_hi] x [u_lo, u_hi] for steps 0..steps-1. Compare with CoefficientSet::lipschitz.
double estimate_lipschitz(const CoefficientSet& coeffs, long steps, double x_lo, double x_hi,
                          double u_lo, double u_hi, int samples, std::uint64_t seed);

/// Control values per path and step, with optional per-entry admissible bounds.
/// Empty bound matrices mean "unbounded".
struct ControlProcess {
  PathMatrix values;
  PathMatrix lower;
  PathMatrix upper;

  Index paths() const noexcept { return values.rows(); }
  Index steps() const noexcept { return values.cols(); }
  bool is_admissible(double tol = 0.0) const;
};

/// Convex combination (1 - eps) u* + eps u~. Bounds are carried over from u*.
ControlProcess perturb_control(const ControlProcess& optimal, const ControlProcess& trial,
                               double eps);

/// Ensemble of state trajectories X_0..X_N (rows = paths).
struct StatePath {
  PathMatrix values;

  Index paths() const noexcept { return values.rows(); }
  long horizon() const noexcept { return static_cast<long>(values.cols()) - 1; }
};

/// u_n as a function of (path, step, current state). Noise history is available to the rule
/// through whatever ensemble it captures; it must only read xi_0..xi_{n-1}.
using FeedbackRule = std::function<double(Index path, long n, double x)>;

/// Exact recursion X_{n+1} = X_n + b + sigma xi_n along every path for n < horizon.
/// x0 has one entry per path (or a single entry broadcast to all paths).
StatePath simulate_state(const CoefficientSet& coeffs, const ControlProcess& control,
                         const NoiseEnsemble& noise, const Eigen::VectorXd& x0, long horizon);

struct ClosedLoopRun {
  StatePath state;
  ControlProcess control;  // horizon + 1 columns: the rule is also evaluated at X_N
};

ClosedLoopRun simulate_closed_loop(const CoefficientSet& coeffs, const FeedbackRule& rule,
                                   const NoiseEnsemble& noise, const Eigen::VectorXd& x0,
                                   long horizon);

/// Linearized state along (X*, u*):
/// Xh_{n+1} = Xh_n + b_x* Xh_n + b_u* v_n + (sigma_x* Xh_n + sigma_u* v_n) xi_n, Xh_0 = 0.
StatePath simulate_variation(const CoefficientSet& coeffs, const StatePath& optimal_state,
                             const ControlProcess& optimal_control,
                             const ControlProcess& direction, const NoiseEnsemble& noise);

/// One row of the perturbation study: squared weighted distance of X^eps from X* and of the
/// difference quotient from the variation process.
struct VariationRate {
  double eps = 0.0;
  double distance_sq = 0.0;  // sum e^{-lambda n^g} E|X^eps_n - X*_n|^2
  double residual_sq = 0.0;  // sum e^{-lambda n^g} E|(X^eps_n - X*_n)/eps - Xh_n|^2
  double residual_sq_direct = 0.0;  // same quantity from subtracting the two simulations
};

/// Simulates X^eps for u^eps = u* + eps v (v = u~ - u*) on the same noise and measures both
/// quantities with an unweighted exponent-2 norm truncated at the state horizon.
/// The residual is propagated through the mean-value recursion of the increment, which is free
/// of the cancellation in (X^eps - X*)/eps; the subtracted form is reported alongside.
std::vector<VariationRate> variation_rates(const CoefficientSet& coeffs,
                                           const StatePath& optimal_state,
                                           const ControlProcess& optimal_control,
                                           const ControlProcess& trial,
                                           const NoiseEnsemble& noise,
                                           std::span<const double> eps_values, double lambda,
                                           double gamma_exp);

}  // namespace fracctrl
