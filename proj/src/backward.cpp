#include "fracctrl/backward.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "fracctrl/errors.hpp"
#include "fracctrl/parallel.hpp"

namespace fracctrl {

const char* to_string(Backend backend) noexcept {
  return backend == Backend::Exact ? "exact" : "regression";
}

std::vector<std::vector<int>> monomial_exponents(int variables, int degree) {
  if (variables < 0 || degree < 0) throw DomainError("monomial_exponents: negative argument");
  std::vector<std::vector<int>> out;
  std::vector<int> current(static_cast<std::size_t>(variables), 0);
  // Graded order: total degree 0, 1, ..., degree.
  for (int total = 0; total <= degree; ++total) {
    std::function<void(int, int)> rec = [&](int var, int remaining) {
      if (var == variables) {
        if (remaining == 0) out.push_back(current);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        current[static_cast<std::size_t>(var)] = e;
        rec(var + 1, remaining - e);
      }
      current[static_cast<std::size_t>(var)] = 0;
    };
    if (variables == 0) {
      if (total == 0) out.emplace_back();
      continue;
    }
    rec(0, total);
  }
  return out;
}

namespace {

std::string describe_basis(const std::vector<std::vector<int>>& exps,
                           const std::vector<std::string>& names) {
  std::ostringstream os;
  for (std::size_t j = 0; j < exps.size(); ++j) {
    if (j) os << ", ";
    bool any = false;
    for (std::size_t v = 0; v < exps[j].size(); ++v) {
      if (exps[j][v] == 0) continue;
      if (any) os << '*';
      os << names[v];
      if (exps[j][v] > 1) os << '^' << exps[j][v];
      any = true;
    }
    if (!any) os << '1';
  }
  return os.str();
}

/// Least-squares projection onto a polynomial basis of raw regressors.
class Projector {
 public:
  Projector(const Eigen::MatrixXd& raw, int degree, std::vector<std::string> names)
      : exps_(monomial_exponents(static_cast<int>(raw.cols()), degree)), names_(std::move(names)) {
    const Index rows = raw.rows();
    const auto k = static_cast<Index>(exps_.size());
    if (rows < k) {
      throw ContractError("regression needs at least as many paths as basis functions (" +
                          std::to_string(rows) + " < " + std::to_string(k) + ")");
    }
    // Scale each raw regressor to unit rms before forming monomials.
    Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(raw.cols());
    for (Index v = 0; v < raw.cols(); ++v) {
      const double rms = std::sqrt(raw.col(v).squaredNorm() / static_cast<double>(rows));
      if (rms > 0.0) scale(v) = rms;
    }
    design_.resize(rows, k);
    for (Index j = 0; j < k; ++j) {
      Eigen::ArrayXd col = Eigen::ArrayXd::Ones(rows);
      for (Index v = 0; v < raw.cols(); ++v) {
        const int e = exps_[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)];
        if (e > 0) col *= (raw.col(v).array() / scale(v)).pow(e);
      }
      design_.col(j) = col.matrix();
    }
    qr_.compute(design_);
    if (qr_.rank() < k) {
      throw NumericalError("rank-deficient regression design (rank " + std::to_string(qr_.rank()) +
                               " of " + std::to_string(k) +
                               "); basis: " + describe_basis(exps_, names_),
                           qr_.rank());
    }
  }

  Index size() const { return design_.cols(); }

  Eigen::MatrixXd fit(const Eigen::MatrixXd& targets) const {
    return design_ * qr_.solve(targets);
  }

 private:
  std::vector<std::vector<int>> exps_;
  std::vector<std::string> names_;
  Eigen::MatrixXd design_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

bool is_constant(const Eigen::VectorXd& v) {
  if (v.size() == 0) return true;
  const double ref = v(0);
  const double tol = 1e-12 * std::max(1.0, std::abs(ref));
  return ((v.array() - ref).abs() <= tol).all();
}

}  // namespace

Eigen::VectorXd conditional_expectation(const Eigen::VectorXd& targets,
                                        const Eigen::MatrixXd& features, Backend backend,
                                        int degree) {
  if (features.rows() != 0 && features.rows() != targets.size())
    throw ContractError("conditional_expectation: features and targets must have one row per path");
  if (backend == Backend::Exact) {
    if (!is_constant(targets))
      throw ContractError("exact backend requires targets that are identical across paths");
    return targets;
  }
  Eigen::MatrixXd raw = features.rows() == 0 ? Eigen::MatrixXd(targets.size(), 0) : features;
  std::vector<std::string> names;
  for (Index v = 0; v < raw.cols(); ++v) names.push_back("f" + std::to_string(v));
  const Projector proj(raw, degree, names);
  return proj.fit(targets);
}

PathMatrix BsdeSolution::discounted_Y() const {
  PathMatrix out = Y;
  for (Index n = 0; n < Y.cols(); ++n) out.col(n) *= discount(lambda, gamma_exp, n);
  return out;
}

PathMatrix BsdeSolution::discounted_Z() const {
  PathMatrix out = Z;
  for (Index n = 0; n < Z.cols(); ++n) out.col(n) *= discount(lambda, gamma_exp, n);
  return out;
}

BsdeSolution solve_truncated(const DriverSpec& driver, const BsdeInputs& inputs,
                             const BsdeOptions& options) {
  const long N = options.truncation;
  if (N < 1) throw DomainError("solve_truncated: truncation must be >= 1");
  if (!driver.f) throw ContractError("solve_truncated: driver f is required");
  if (!(options.lambda > 0.0)) throw DomainError("solve_truncated: lambda must be positive");

  const NoiseEnsemble* noise = inputs.noise;
  const StatePath* state = inputs.state;
  const ControlProcess* control = inputs.control;

  Index paths = 1;
  if (noise) paths = noise->paths();
  else if (state) paths = state->paths();

  if (state && (state->paths() != paths || state->horizon() < N))
    throw ContractError("solve_truncated: state must cover every path up to the truncation");
  if (control && (control->paths() != paths || control->steps() < N + 1))
    throw ContractError("solve_truncated: control must cover every path for steps 0..N");
  if (noise && noise->horizon() < N)
    throw RangeError("solve_truncated: noise horizon shorter than truncation");
  if (driver.g && (!noise || noise->horizon() < N + 1))
    throw RangeError("solve_truncated: noise-coefficient driver needs predictions up to step N");
  if (options.backend == Backend::Regression && !noise)
    throw ContractError("solve_truncated: regression backend needs a noise ensemble");

  BsdeSolution sol;
  sol.truncation = N;
  sol.backend = options.backend;
  sol.lambda = options.lambda;
  sol.gamma_exp = options.gamma_exp;
  sol.Y = PathMatrix::Zero(paths, N + 1);
  sol.Z = PathMatrix::Zero(paths, N);
  sol.terminal_driver_defaulted = !driver.f_terminal || (driver.g && !driver.g_terminal);
  sol.steps.resize(static_cast<std::size_t>(N));

  Eigen::VectorXd target(paths);
  for (long n = N - 1; n >= 0; --n) {
    const long m = n + 1;
    const double ratio = std::exp(-options.lambda * (std::pow(static_cast<double>(m), options.gamma_exp) -
                                                     std::pow(static_cast<double>(n), options.gamma_exp)));
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
      const auto p = static_cast<Index>(i);
      DriverArgs args;
      args.path = p;
      args.n = m;
      args.x = state ? state->values(p, m) : 0.0;
      args.u = control ? control->values(p, m) : 0.0;
      args.y = sol.Y(p, m);
      args.z = m < N ? sol.Z(p, m) : 0.0;
      double fv;
      double gv = 0.0;
      if (m == N) {
        fv = driver.f_terminal ? driver.f_terminal(args) : driver.f(args);
        if (driver.g) gv = driver.g_terminal ? driver.g_terminal(args) : driver.g(args);
      } else {
        fv = driver.f(args);
        if (driver.g) gv = driver.g(args);
      }
      double value = args.y + fv;
      if (driver.g) value += gv * noise->prediction(p, m);
      target(p) = ratio * value;
    });
    if (!target.allFinite())
      throw NumericalError("non-finite backward target at step " + std::to_string(n), n);

    StepDiagnostic& diag = sol.steps[static_cast<std::size_t>(n)];
    diag.n = n;
    diag.target_mean = target.mean();

    if (options.backend == Backend::Exact) {
      if (!is_constant(target)) {
        throw ContractError("exact backend requested but the backward target at step " +
                            std::to_string(n) + " varies across paths");
      }
      sol.Y.col(n).setConstant(target(0));
      diag.basis_size = 1;
      continue;
    }

    const RegressionBasis& basis = options.basis;
    const long first = std::max(0L, n - static_cast<long>(basis.window));
    const Index lags = n - first;
    const bool with_state = basis.include_state && state && n > 0;
    Eigen::MatrixXd raw(paths, lags + (with_state ? 1 : 0));
    std::vector<std::string> names;
    for (Index j = 0; j < lags; ++j) {
      raw.col(j) = noise->noise.col(n - 1 - j);
      names.push_back("xi[n-" + std::to_string(j + 1) + "]");
    }
    if (with_state) {
      raw.col(lags) = state->values.col(n);
      names.push_back("X[n]");
    }
    const Projector proj(raw, basis.degree, names);
    const Eigen::VectorXd y = proj.fit(target);
    // E[eta_n Y_n | F_n] = 0, so projecting eta_n (target - Y_n) gives the same Z with the
    // F_n-measurable part of the target removed.
    const Eigen::VectorXd resid = target - y;
    sol.Y.col(n) = y;
    sol.Z.col(n) = proj.fit(noise->innovations.col(n).cwiseProduct(resid));
    diag.basis_size = proj.size();
    diag.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(paths));
  }
  return sol;
}

CauchyReport cauchy_diagnostic(const DriverSpec& driver, const BsdeInputs& inputs,
                               const BsdeOptions& options, std::span<const long> truncations,
                               double theta, double b) {
  if (truncations.size() < 2) throw DomainError("cauchy_diagnostic: need at least two truncations");
  for (std::size_t i = 1; i < truncations.size(); ++i)
    if (truncations[i] <= truncations[i - 1])
      throw DomainError("cauchy_diagnostic: truncations must be strictly ascending");

  CauchyReport report;
  report.lambda = options.lambda;
  report.gamma_exp = options.gamma_exp;
  report.theta = theta;
  report.base_power = 2.0 * b;

  WeightedNormParams params;
  params.lambda = options.lambda;
  params.gamma_exp = options.gamma_exp;
  params.base_power = 2.0 * b;
  params.theta = theta;
  params.direction = NormDirection::Backward;

  std::vector<BsdeSolution> sols;
  for (long N : truncations) {
    BsdeOptions opt = options;
    opt.truncation = N;
    sols.push_back(solve_truncated(driver, inputs, opt));
  }

  for (std::size_t i = 0; i + 1 < sols.size(); ++i) {
    const BsdeSolution& shorter = sols[i];
    const BsdeSolution& longer = sols[i + 1];
    const long M = shorter.truncation;
    const long N = longer.truncation;

    PathMatrix dy = longer.Y;
    dy.leftCols(M + 1) -= shorter.Y;
    PathMatrix dz = longer.Z;
    dz.leftCols(M) -= shorter.Z;

    CauchyRow row;
    row.shorter = M;
    row.longer = N;
    row.y_norm = weighted_norm(dy, params, N).value;
    row.z_norm = weighted_norm(dz, params, N - 1).value;
    row.total = row.y_norm + row.z_norm;
    const double p_m = norm_exponents(params, M)[static_cast<std::size_t>(M)];
    const double log_mean = log_mean_abs_power(longer.Y.col(M), p_m);
    row.tail_term = log_mean > -HUGE_VAL
                        ? std::exp(-params.lambda * std::pow(static_cast<double>(M), params.gamma_exp) +
                                   log_mean)
                        : 0.0;
    report.rows.push_back(row);
  }

  report.monotone_decay = true;
  report.tail_decay = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    if (!(report.rows[i].total < report.rows[i - 1].total)) report.monotone_decay = false;
    if (report.rows[i].tail_term > report.rows[i - 1].tail_term) report.tail_decay = false;
  }
  return report;
}

}  // namespace fracctrl
