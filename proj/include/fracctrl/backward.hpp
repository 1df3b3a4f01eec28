#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracctrl/forward.hpp"
#include "fracctrl/fracnoise.hpp"
#include "fracctrl/spaces.hpp"
#include "fracctrl/types.hpp"

namespace fracctrl {

/// How E[. | F_n] is evaluated.
///  Exact:      the conditioned quantity must be deterministic (identical on every path);
///              its expectation is the value itself and every Z vanishes.
///  Regression: least-squares projection on a polynomial basis of recent noise values
///              (and optionally the current state), fitted across the ensemble.
enum class Backend { Exact, Regression };

const char* to_string(Backend backend) noexcept;

struct RegressionBasis {
  int degree = 2;
  int window = 3;              // xi_{n-window} .. xi_{n-1}
  bool include_state = false;  // adds X_n as a regressor
};

/// Point at which a driver is evaluated. `x` and `u` are read from the supplied state and
/// control ensembles (0 when absent).
struct DriverArgs {
  Index path = 0;
  long n = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double u = 0.0;
};

/// Generator of
///   e^{-l n^g}(Y_n + Z_n eta_n) = e^{-l (n+1)^g}(Y_{n+1} + f(n+1, .) + g(n+1, .) E[xi_{n+1} | F_{n+1}]).
/// At the truncation step N the terminal functions f1(N, y), g1(N, y) replace f and g; when they
/// are not given, f(N, x, y, 0, u) and g(N, x, y, 0, u) are used and the solution is flagged.
struct DriverSpec {
  using Fn = std::function<double(const DriverArgs&)>;
  Fn f;
  Fn g;
  Fn f_terminal;
  Fn g_terminal;
  // Partials along the evaluation point; only the maximum-principle code reads them.
  Fn f_x;
  Fn f_y;
  Fn f_z;
  Fn f_u;
  double lipschitz = 0.0;
};

/// Ensembles the driver is evaluated on. Any of them may be null; the path count comes from
/// the noise ensemble, else the state, else a single deterministic path.
struct BsdeInputs {
  const StatePath* state = nullptr;
  const ControlProcess* control = nullptr;
  const NoiseEnsemble* noise = nullptr;
};

struct BsdeOptions {
  long truncation = 1;
  Backend backend = Backend::Exact;
  double lambda = 1.0;
  double gamma_exp = 2.0;
  RegressionBasis basis;
};

struct StepDiagnostic {
  long n = 0;
  Index basis_size = 1;
  double target_mean = 0.0;
  double residual_rms = 0.0;  // rms of (target - fitted Y_n), i.e. the martingale increment
};

struct BsdeSolution {
  long truncation = 0;
  Backend backend = Backend::Exact;
  double lambda = 1.0;
  double gamma_exp = 2.0;
  PathMatrix Y;  // paths x (N+1); Y(:, N) = 0
  PathMatrix Z;  // paths x N
  std::vector<StepDiagnostic> steps;
  bool terminal_driver_defaulted = false;

  Index paths() const noexcept { return Y.rows(); }
  /// e^{-lambda n^g} Y_n, the variables the recursion is posed in.
  PathMatrix discounted_Y() const;
  PathMatrix discounted_Z() const;
};

/// Solves the truncated equation backward from Y_N = 0.
///
/// At each step the target e^{-l((n+1)^g - n^g)}(Y_{n+1} + f + g * pred) is projected onto the
/// step-n information: Y_n = E[target | F_n], Z_n = E[eta_n * target | F_n]. This is the
/// discounted formulation with the F_n-measurable factor e^{-l n^g} cancelled, which keeps the
/// values finite for large n.
BsdeSolution solve_truncated(const DriverSpec& driver, const BsdeInputs& inputs,
                             const BsdeOptions& options);

/// E[targets | features] for one step. `features` has one row per path and one column per raw
/// regressor; the polynomial basis of total degree <= `degree` (including the constant) is built
/// internally. Exact backend: targets must be identical across paths.
Eigen::VectorXd conditional_expectation(const Eigen::VectorXd& targets,
                                        const Eigen::MatrixXd& features, Backend backend,
                                        int degree = 2);

/// Exponent tuples of all monomials in `variables` regressors with total degree <= degree,
/// constant first.
std::vector<std::vector<int>> monomial_exponents(int variables, int degree);

struct CauchyRow {
  long shorter = 0;       // M
  long longer = 0;        // N
  double y_norm = 0.0;    // backward weighted norm of Y^N - Y^M
  double z_norm = 0.0;    // backward weighted norm of Z^N - Z^M
  double total = 0.0;
  double tail_term = 0.0; // e^{-l M^g} E|Y^N_M|^{p(M)}
};

struct CauchyReport {
  double lambda = 1.0;
  double gamma_exp = 2.0;
  double theta = 2.0;
  double base_power = 2.0;
  std::vector<CauchyRow> rows;
  bool monotone_decay = false;  // totals strictly decreasing along the list
  bool tail_decay = false;      // tail terms non-increasing along the list
};

/// Solves at every truncation in `truncations` (ascending) and compares consecutive pairs in the
/// backward weighted norm with exponents 2b / (delta_1 ... delta_n). Y^M is extended by zero past M.
CauchyReport cauchy_diagnostic(const DriverSpec& driver, const BsdeInputs& inputs,
                               const BsdeOptions& options, std::span<const long> truncations,
                               double theta, double b);

}  // namespace fracctrl
