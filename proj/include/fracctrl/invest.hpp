#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracctrl/backward.hpp"
#include "fracctrl/forward.hpp"
#include "fracctrl/fracnoise.hpp"
#include "fracctrl/smp.hpp"

namespace fracctrl {

/// Wealth X_{n+1} = (1+r)(X_n - c X_n chi_n) + (mu - r) v_n + sigma v_n xi_n with consumption at
/// the times in `consumption_times` (or every `consumption_period` steps when the list is empty),
/// and cost driver f = (lambda/2) y - Q x chi_n + R v^beta_exp.
struct InvestConfig {
  double mu = 0.15;
  double r = 0.05;
  double sigma = 0.2;
  double lambda = 1.0;
  double beta_exp = 2.0;
  double c = 0.5;
  double Q = 1.0;
  double R = 0.01;
  long consumption_period = 10;
  std::vector<long> consumption_times;
  double hurst = 0.75;
  double x0 = 1.0;
  long horizon = 50;
  long paths = 100;
  std::uint64_t seed = 42;
  double gamma_exp = 1.3;
  long truncation_margin = 20;

  void validate() const;
  bool consumes(long n) const;
  /// Upper end of the admissible control range, X (1 - c chi_n), floored at 0.
  double control_cap(long n, double x) const;
};

CoefficientSet make_invest_coefficients(const InvestConfig& cfg);
DriverSpec make_invest_cost(const InvestConfig& cfg);
ControlModel make_invest_model(const InvestConfig& cfg);

/// k_n = -(1 + lambda/2)^{n-1}, k_0 = 0.
Eigen::VectorXd invest_k_closed_form(const InvestConfig& cfg, long horizon);

/// Deterministic adjoint p (q = 0) at truncation `truncation`, exact backend.
BsdeSolution solve_invest_adjoint(const InvestConfig& cfg, long truncation);

/// v*_n = (0 v A / (beta k_n R))^{1/(beta-1)} ^ X(1 - c chi_n), A = (mu - r) p_n + sigma p_n pred.
/// At n = 0 (k_0 = 0) the minimizer sits at an end of the range: the cap if A < 0, else 0.
double closed_form_control(long n, double p_n, double k_n, double x, double prediction,
                           const InvestConfig& cfg);
double closed_form_control(long n, double p_n, double k_n, double x,
                           std::span<const double> noise_prefix, const InnovationSystem& sys,
                           const InvestConfig& cfg);

struct InvestResult {
  InvestConfig config;
  NoiseEnsemble noise;
  StatePath wealth;
  ControlProcess control;  // horizon + 1 columns, with the admissible bounds attached
  BsdeSolution adjoint;    // (p, q) at truncation horizon + margin
  Eigen::VectorXd p;       // steps 0..horizon
  Eigen::VectorXd q;
  Eigen::VectorXd k;
  double k_recursion_gap = 0.0;  // max |k closed form - k recursion| / max(1, |k|)
  std::vector<long> clamped_low;   // per step: paths with v* = 0
  std::vector<long> clamped_high;  // per step: paths with v* at the cap
  std::vector<std::filesystem::path> artifacts;
};

/// Builds the innovation system, solves for p (truncation horizon + margin), simulates X* under
/// the clamped closed-form control. Writes CSVs and the plot script when `out_dir` is given.
InvestResult run_experiment(const InvestConfig& cfg,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Trial controls drawn uniformly from [0, X*_n (1 - c chi_n)] on each path and step.
std::vector<ControlProcess> random_admissible_controls(const InvestConfig& cfg,
                                                       const StatePath& wealth, std::size_t count,
                                                       std::uint64_t seed);

/// Necessary-condition bracket along (X*, v*) with the adjoint of `result`.
PathMatrix invest_bracket(const InvestResult& result);

/// Checks the optimal control against `trials` random admissible controls, generated one at a
/// time from `seed`.
NecessaryConditionReport invest_necessary_condition(const InvestResult& result, std::size_t trials,
                                                    double tolerance, std::uint64_t seed);

/// Truncation study of the adjoint p in the backward weighted norm (theta, 2b).
CauchyReport invest_adjoint_cauchy(const InvestConfig& cfg, std::span<const long> truncations,
                                   double theta, double b);

/// Duality identity along the run's trajectory for direction v, with p truncated at the horizon
/// and the variational cost equation solved by regression.
DualityReport invest_duality(const InvestResult& result, const ControlProcess& direction,
                             const RegressionBasis& basis = {});

/// J(u) of the invest cost at truncation `horizon` on the run's noise ensemble.
double invest_cost(const InvestResult& result, const ControlProcess& control,
                   const RegressionBasis& basis = {});

std::vector<std::filesystem::path> write_invest_artifacts(const InvestResult& result,
                                                          const std::filesystem::path& dir);

}  // namespace fracctrl
