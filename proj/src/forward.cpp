#include "fracctrl/forward.hpp"

#include <cmath>
#include <string>

#include "fracctrl/errors.hpp"
#include "fracctrl/parallel.hpp"
#include "fracctrl/rng.hpp"

namespace fracctrl {

namespace {

double initial_value(const Eigen::VectorXd& x0, Index path) {
  return x0.size() == 1 ? x0(0) : x0(path);
}

void check_initial(const Eigen::VectorXd& x0, Index paths) {
  if (x0.size() != 1 && x0.size() != paths)
    throw ContractError("initial state must have one entry or one entry per path");
}

void check_noise(const NoiseEnsemble& noise, long horizon) {
  if (horizon < 0) throw DomainError("horizon must be non-negative");
  if (noise.horizon() < horizon)
    throw RangeError("noise horizon " + std::to_string(noise.horizon()) +
                     " shorter than requested horizon " + std::to_string(horizon));
}

[[noreturn]] void non_finite(Index path, long n) {
  throw NumericalError("non-finite state on path " + std::to_string(path) + " at step " +
                           std::to_string(n),
                       path);
}

}  // namespace

double estimate_lipschitz(const CoefficientSet& coeffs, long steps, double x_lo, double x_hi,
                          double u_lo, double u_hi, int samples, std::uint64_t seed) {
  NormalStream rng(seed);
  double worst = 0.0;
  for (long n = 0; n < steps; ++n) {
    for (int s = 0; s < samples; ++s) {
      const double x1 = x_lo + (x_hi - x_lo) * rng.uniform();
      const double x2 = x_lo + (x_hi - x_lo) * rng.uniform();
      const double u1 = u_lo + (u_hi - u_lo) * rng.uniform();
      const double u2 = u_lo + (u_hi - u_lo) * rng.uniform();
      const double denom = std::abs(x1 - x2) + std::abs(u1 - u2);
      if (denom == 0.0) continue;
      const double num = std::abs(coeffs.drift(n, x1, u1) - coeffs.drift(n, x2, u2)) +
                         std::abs(coeffs.diffusion(n, x1, u1) - coeffs.diffusion(n, x2, u2));
      worst = std::max(worst, num / denom);
    }
  }
  return worst;
}

bool ControlProcess::is_admissible(double tol) const {
  if (lower.size() != 0 && ((values - lower).array() < -tol).any()) return false;
  if (upper.size() != 0 && ((values - upper).array() > tol).any()) return false;
  return values.allFinite();
}

ControlProcess perturb_control(const ControlProcess& optimal, const ControlProcess& trial,
                               double eps) {
  if (!(eps >= 0.0 && eps <= 1.0))
    throw DomainError("perturb_control: eps must lie in [0,1], got " + std::to_string(eps));
  if (optimal.values.rows() != trial.values.rows() || optimal.values.cols() != trial.values.cols())
    throw ContractError("perturb_control: controls must have the same shape");
  ControlProcess out;
  out.values = (1.0 - eps) * optimal.values + eps * trial.values;
  out.lower = optimal.lower;
  out.upper = optimal.upper;
  return out;
}

StatePath simulate_state(const CoefficientSet& coeffs, const ControlProcess& control,
                         const NoiseEnsemble& noise, const Eigen::VectorXd& x0, long horizon) {
  check_noise(noise, horizon);
  const Index paths = noise.paths();
  check_initial(x0, paths);
  if (control.paths() != paths || control.steps() < horizon)
    throw ContractError("simulate_state: control must cover every path and step");

  StatePath out;
  out.values.resize(paths, horizon + 1);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const auto p = static_cast<Index>(i);
    double x = initial_value(x0, p);
    out.values(p, 0) = x;
    for (long n = 0; n < horizon; ++n) {
      const double u = control.values(p, n);
      x = x + coeffs.drift(n, x, u) + coeffs.diffusion(n, x, u) * noise.noise(p, n);
      if (!std::isfinite(x)) non_finite(p, n + 1);
      out.values(p, n + 1) = x;
    }
  });
  return out;
}

ClosedLoopRun simulate_closed_loop(const CoefficientSet& coeffs, const FeedbackRule& rule,
                                   const NoiseEnsemble& noise, const Eigen::VectorXd& x0,
                                   long horizon) {
  check_noise(noise, horizon);
  const Index paths = noise.paths();
  check_initial(x0, paths);

  ClosedLoopRun run;
  run.state.values.resize(paths, horizon + 1);
  run.control.values.resize(paths, horizon + 1);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const auto p = static_cast<Index>(i);
    double x = initial_value(x0, p);
    run.state.values(p, 0) = x;
    for (long n = 0; n < horizon; ++n) {
      const double u = rule(p, n, x);
      run.control.values(p, n) = u;
      x = x + coeffs.drift(n, x, u) + coeffs.diffusion(n, x, u) * noise.noise(p, n);
      if (!std::isfinite(x)) non_finite(p, n + 1);
      run.state.values(p, n + 1) = x;
    }
    run.control.values(p, horizon) = rule(p, horizon, x);
  });
  return run;
}

StatePath simulate_variation(const CoefficientSet& coeffs, const StatePath& optimal_state,
                             const ControlProcess& optimal_control,
                             const ControlProcess& direction, const NoiseEnsemble& noise) {
  const long horizon = optimal_state.horizon();
  check_noise(noise, horizon);
  const Index paths = optimal_state.paths();
  if (noise.paths() != paths || optimal_control.paths() != paths || direction.paths() != paths)
    throw ContractError("simulate_variation: optimal path, control, direction and noise must align");
  if (optimal_control.steps() < horizon || direction.steps() < horizon)
    throw ContractError("simulate_variation: controls must cover the state horizon");

  StatePath out;
  out.values.resize(paths, horizon + 1);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const auto p = static_cast<Index>(i);
    double xh = 0.0;
    out.values(p, 0) = 0.0;
    for (long n = 0; n < horizon; ++n) {
      const double xs = optimal_state.values(p, n);
      const double us = optimal_control.values(p, n);
      const double v = direction.values(p, n);
      xh = xh + coeffs.drift_x(n, xs, us) * xh + coeffs.drift_u(n, xs, us) * v +
           (coeffs.diffusion_x(n, xs, us) * xh + coeffs.diffusion_u(n, xs, us) * v) *
               noise.noise(p, n);
      if (!std::isfinite(xh)) non_finite(p, n + 1);
      out.values(p, n + 1) = xh;
    }
  });
  return out;
}

namespace {

// 8-point Gauss-Legendre rule mapped to [0, 1].
constexpr double kGaussNodes[8] = {0.019855071751231912, 0.10166676129318664, 0.2372337950418355,
                                   0.4082826787521751,   0.5917173212478248,  0.7627662049581645,
                                   0.8983332387068134,   0.9801449282487681};
constexpr double kGaussWeights[8] = {0.050614268145188344, 0.11119051722668717, 0.15685332293894352,
                                     0.18134189168918088,  0.18134189168918088, 0.15685332293894352,
                                     0.11119051722668717,  0.050614268145188344};

}  // namespace

std::vector<VariationRate> variation_rates(const CoefficientSet& coeffs,
                                           const StatePath& optimal_state,
                                           const ControlProcess& optimal_control,
                                           const ControlProcess& trial,
                                           const NoiseEnsemble& noise,
                                           std::span<const double> eps_values, double lambda,
                                           double gamma_exp) {
  const long horizon = optimal_state.horizon();
  ControlProcess direction;
  direction.values = trial.values - optimal_control.values;
  const StatePath variation =
      simulate_variation(coeffs, optimal_state, optimal_control, direction, noise);
  const Eigen::VectorXd x0 = optimal_state.values.col(0);
  const Index paths = optimal_state.paths();

  WeightedNormParams params;
  params.lambda = lambda;
  params.gamma_exp = gamma_exp;
  params.base_power = 2.0;
  params.direction = NormDirection::Unweighted;

  std::vector<VariationRate> rows;
  for (double eps : eps_values) {
    const ControlProcess perturbed = perturb_control(optimal_control, trial, eps);
    const StatePath state = simulate_state(coeffs, perturbed, noise, x0, horizon);
    const PathMatrix diff = state.values - optimal_state.values;
    const PathMatrix direct = diff / eps - variation.values;

    // R = (X^eps - X*)/eps - Xh through the mean-value form of the increment:
    // R_{n+1} = R_n + bt_x R_n + (bt_x - b_x*) Xh_n + (bt_u - b_u*) v_n + (same with sigma) xi_n,
    // where bt_. averages the partial over the segment (X*_n, u*_n) -> (X^eps_n, u^eps_n).
    PathMatrix residual = PathMatrix::Zero(paths, horizon + 1);
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
      const auto p = static_cast<Index>(i);
      double r = 0.0;
      for (long n = 0; n < horizon; ++n) {
        const double xs = optimal_state.values(p, n), us = optimal_control.values(p, n);
        const double dx = diff(p, n), du = eps * direction.values(p, n);
        const double bx = coeffs.drift_x(n, xs, us), bu = coeffs.drift_u(n, xs, us);
        const double sx = coeffs.diffusion_x(n, xs, us), su = coeffs.diffusion_u(n, xs, us);
        double dbx = 0.0, dbu = 0.0, dsx = 0.0, dsu = 0.0;
        for (int q = 0; q < 8; ++q) {
          const double x = xs + kGaussNodes[q] * dx, u = us + kGaussNodes[q] * du;
          dbx += kGaussWeights[q] * (coeffs.drift_x(n, x, u) - bx);
          dbu += kGaussWeights[q] * (coeffs.drift_u(n, x, u) - bu);
          dsx += kGaussWeights[q] * (coeffs.diffusion_x(n, x, u) - sx);
          dsu += kGaussWeights[q] * (coeffs.diffusion_u(n, x, u) - su);
        }
        const double xh = variation.values(p, n), v = direction.values(p, n);
        const double drift_part = (bx + dbx) * r + dbx * xh + dbu * v;
        const double noise_part = (sx + dsx) * r + dsx * xh + dsu * v;
        r = r + drift_part + noise_part * noise.noise(p, n);
        residual(p, n + 1) = r;
      }
    });

    VariationRate row;
    row.eps = eps;
    row.distance_sq = weighted_norm(diff, params, horizon).value;
    row.residual_sq = weighted_norm(residual, params, horizon).value;
    row.residual_sq_direct = weighted_norm(direct, params, horizon).value;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fracctrl
