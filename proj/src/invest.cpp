#include "fracctrl/invest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fracctrl/errors.hpp"
#include "fracctrl/io.hpp"
#include "fracctrl/rng.hpp"

namespace fracctrl {

void InvestConfig::validate() const {
  if (!(r < mu)) throw DomainError("invest: r must be below mu");
  if (!(c > 0.0 && c < 1.0)) throw DomainError("invest: c must lie in (0, 1)");
  if (!(beta_exp > 1.0)) throw DomainError("invest: beta_exp must exceed 1");
  if (!(Q > 0.0) || !(R > 0.0)) throw DomainError("invest: Q and R must be positive");
  if (!(sigma >= 0.0)) throw DomainError("invest: sigma must be non-negative");
  if (!(lambda > 0.0)) throw DomainError("invest: lambda must be positive");
  if (!(gamma_exp > 1.0)) throw DomainError("invest: gamma_exp must exceed 1");
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("invest: hurst must lie in (0, 1)");
  if (!std::isfinite(x0)) throw DomainError("invest: x0 must be finite");
  if (horizon < 1) throw DomainError("invest: horizon must be >= 1");
  if (paths < 1) throw DomainError("invest: paths must be >= 1");
  if (truncation_margin < 0) throw DomainError("invest: truncation_margin must be >= 0");
  if (consumption_times.empty() && consumption_period < 1)
    throw DomainError("invest: consumption_period must be >= 1");
  for (long t : consumption_times)
    if (t < 0) throw DomainError("invest: consumption times must be non-negative");
}

bool InvestConfig::consumes(long n) const {
  if (!consumption_times.empty())
    return std::find(consumption_times.begin(), consumption_times.end(), n) !=
           consumption_times.end();
  return n > 0 && n % consumption_period == 0;
}

double InvestConfig::control_cap(long n, double x) const {
  return std::max(0.0, x * (1.0 - (consumes(n) ? c : 0.0)));
}

CoefficientSet make_invest_coefficients(const InvestConfig& cfg) {
  CoefficientSet s;
  const double r = cfg.r, excess = cfg.mu - cfg.r, sigma = cfg.sigma, c = cfg.c;
  auto chi = [cfg](long n) { return cfg.consumes(n) ? 1.0 : 0.0; };
  s.drift = [=](long n, double x, double u) { return (1.0 + r) * (x - c * x * chi(n)) - x + excess * u; };
  s.diffusion = [=](long, double, double u) { return sigma * u; };
  s.drift_x = [=](long n, double, double) { return (1.0 + r) * (1.0 - c * chi(n)) - 1.0; };
  s.drift_u = [=](long, double, double) { return excess; };
  s.diffusion_x = [](long, double, double) { return 0.0; };
  s.diffusion_u = [=](long, double, double) { return sigma; };
  s.lipschitz = std::max(std::abs(r), std::abs((1.0 + r) * (1.0 - c) - 1.0)) + excess + sigma;
  return s;
}

DriverSpec make_invest_cost(const InvestConfig& cfg) {
  DriverSpec d;
  const double half_lambda = 0.5 * cfg.lambda, Q = cfg.Q, R = cfg.R, beta = cfg.beta_exp;
  auto chi = [cfg](long n) { return cfg.consumes(n) ? 1.0 : 0.0; };
  d.f = [=](const DriverArgs& a) {
    return half_lambda * a.y - Q * a.x * chi(a.n) + R * std::pow(std::abs(a.u), beta);
  };
  d.f_x = [=](const DriverArgs& a) { return -Q * chi(a.n); };
  d.f_y = [=](const DriverArgs&) { return half_lambda; };
  d.f_z = [](const DriverArgs&) { return 0.0; };
  d.f_u = [=](const DriverArgs& a) {
    const double mag = R * beta * std::pow(std::abs(a.u), beta - 1.0);
    return a.u < 0.0 ? -mag : mag;
  };
  d.lipschitz = half_lambda;
  return d;
}

ControlModel make_invest_model(const InvestConfig& cfg) {
  return {make_invest_coefficients(cfg), make_invest_cost(cfg)};
}

Eigen::VectorXd invest_k_closed_form(const InvestConfig& cfg, long horizon) {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(horizon + 1);
  const long double growth = 1.0L + 0.5L * cfg.lambda;
  for (long n = 1; n <= horizon; ++n)
    k(n) = -static_cast<double>(std::pow(growth, static_cast<long double>(n - 1)));
  return k;
}

BsdeSolution solve_invest_adjoint(const InvestConfig& cfg, long truncation) {
  const ControlModel model = make_invest_model(cfg);
  const PathMatrix k = invest_k_closed_form(cfg, truncation).transpose();
  const InnovationSystem sys = build_innovation_system(HurstParam(cfg.hurst), 1);
  BsdeOptions opt;
  opt.truncation = truncation;
  opt.backend = Backend::Exact;
  opt.lambda = cfg.lambda;
  opt.gamma_exp = cfg.gamma_exp;
  return solve_adjoint_pq(model, OptimalTrajectory{}, k, sys, opt);
}

double closed_form_control(long n, double p_n, double k_n, double x, double prediction,
                           const InvestConfig& cfg) {
  const double cap = cfg.control_cap(n, x);
  using ld = long double;
  const ld a = static_cast<ld>(cfg.mu - cfg.r) * p_n + static_cast<ld>(cfg.sigma) * p_n * prediction;
  if (k_n == 0.0) {
    if (n >= 1) throw ContractError("closed_form_control: k_n = 0 at n >= 1");
    return a < 0.0L ? cap : 0.0;
  }
  const ld base = std::max(0.0L, a / (static_cast<ld>(cfg.beta_exp) * k_n * cfg.R));
  const ld v = cfg.beta_exp == 2.0 ? base : std::pow(base, 1.0L / (static_cast<ld>(cfg.beta_exp) - 1.0L));
  return std::min(static_cast<double>(v), cap);
}

double closed_form_control(long n, double p_n, double k_n, double x,
                           std::span<const double> noise_prefix, const InnovationSystem& sys,
                           const InvestConfig& cfg) {
  if (static_cast<long>(noise_prefix.size()) != n)
    throw ContractError("closed_form_control: noise prefix must hold xi_0..xi_{n-1}");
  return closed_form_control(n, p_n, k_n, x, sys.predict_next(noise_prefix), cfg);
}

InvestResult run_experiment(const InvestConfig& cfg,
                            const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  const long N = cfg.horizon;
  InvestResult res;
  res.config = cfg;

  const InnovationSystem sys = build_innovation_system(HurstParam(cfg.hurst), N + 1);
  res.noise = sample_ensemble(sys, cfg.seed, cfg.paths);

  const long Np = N + std::max(1L, cfg.truncation_margin);
  res.adjoint = solve_invest_adjoint(cfg, Np);
  const BsdeSolution& pq = res.adjoint;
  res.p = pq.Y.row(0).head(N + 1).transpose();
  res.q = pq.Z.row(0).head(N + 1).transpose();
  res.k = invest_k_closed_form(cfg, N);

  const double half_lambda = 0.5 * cfg.lambda;
  const PathMatrix k_rec = solve_adjoint_k([=](Index, long) { return half_lambda; }, nullptr, nullptr, N);
  for (long n = 0; n <= N; ++n) {
    const double gap = std::abs(res.k(n) - k_rec(0, n)) / std::max(1.0, std::abs(res.k(n)));
    res.k_recursion_gap = std::max(res.k_recursion_gap, gap);
  }

  const CoefficientSet coeffs = make_invest_coefficients(cfg);
  const NoiseEnsemble& noise = res.noise;
  const Eigen::VectorXd& p = res.p;
  const Eigen::VectorXd& k = res.k;
  FeedbackRule rule = [&](Index path, long n, double x) {
    return closed_form_control(n, p(n), k(n), x, noise.prediction(path, n), cfg);
  };
  ClosedLoopRun run = simulate_closed_loop(coeffs, rule, noise, Eigen::VectorXd::Constant(1, cfg.x0), N);
  res.wealth = std::move(run.state);
  res.control = std::move(run.control);

  const Index P = res.wealth.paths();
  res.control.lower = PathMatrix::Zero(P, N + 1);
  res.control.upper.resize(P, N + 1);
  res.clamped_low.assign(static_cast<std::size_t>(N + 1), 0);
  res.clamped_high.assign(static_cast<std::size_t>(N + 1), 0);
  for (Index i = 0; i < P; ++i) {
    for (long n = 0; n <= N; ++n) {
      const double cap = cfg.control_cap(n, res.wealth.values(i, n));
      const double v = res.control.values(i, n);
      res.control.upper(i, n) = cap;
      if (v == 0.0) ++res.clamped_low[static_cast<std::size_t>(n)];
      else if (v == cap) ++res.clamped_high[static_cast<std::size_t>(n)];
    }
  }

  if (out_dir) res.artifacts = write_invest_artifacts(res, *out_dir);
  return res;
}

std::vector<ControlProcess> random_admissible_controls(const InvestConfig& cfg,
                                                       const StatePath& wealth, std::size_t count,
                                                       std::uint64_t seed) {
  const Index P = wealth.paths();
  const long N = wealth.horizon();
  std::vector<ControlProcess> out(count);
  for (std::size_t t = 0; t < count; ++t) {
    NormalStream rng(derive_seed(seed, t));
    ControlProcess& u = out[t];
    u.values.resize(P, N + 1);
    u.lower = PathMatrix::Zero(P, N + 1);
    u.upper.resize(P, N + 1);
    for (Index i = 0; i < P; ++i) {
      for (long n = 0; n <= N; ++n) {
        const double cap = cfg.control_cap(n, wealth.values(i, n));
        u.upper(i, n) = cap;
        u.values(i, n) = cap * rng.uniform();
      }
    }
  }
  return out;
}

PathMatrix invest_bracket(const InvestResult& result) {
  const ControlModel model = make_invest_model(result.config);
  const InnovationSystem sys = build_innovation_system(HurstParam(result.config.hurst), 1);
  OptimalTrajectory traj;
  traj.state = &result.wealth;
  traj.control = &result.control;
  traj.noise = &result.noise;
  const AdjointTriple adj{result.k.transpose(), result.adjoint};
  return necessary_condition_bracket(model, traj, adj, sys);
}

NecessaryConditionReport invest_necessary_condition(const InvestResult& result, std::size_t trials,
                                                    double tolerance, std::uint64_t seed) {
  const PathMatrix bracket = invest_bracket(result);
  NecessaryConditionReport total;
  total.tolerance = tolerance;
  total.trials = trials;
  total.min_bracket_product = trials ? HUGE_VAL : 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto trial = random_admissible_controls(result.config, result.wealth, 1, derive_seed(seed, t));
    const NecessaryConditionReport one = check_necessary_condition(bracket, result.control, trial, tolerance);
    total.min_bracket_product = std::min(total.min_bracket_product, one.min_bracket_product);
    total.violation_count += one.violation_count;
    total.evaluations += one.evaluations;
    for (ConditionViolation v : one.violations) {
      if (total.violations.size() >= 100) break;
      v.trial = t;
      total.violations.push_back(v);
    }
  }
  return total;
}

CauchyReport invest_adjoint_cauchy(const InvestConfig& cfg, std::span<const long> truncations,
                                   double theta, double b) {
  cfg.validate();
  if (truncations.empty()) throw DomainError("invest_adjoint_cauchy: no truncations");
  const long longest = *std::max_element(truncations.begin(), truncations.end());
  const ControlModel model = make_invest_model(cfg);
  const PathMatrix k = invest_k_closed_form(cfg, longest).transpose();
  const InnovationSystem sys = build_innovation_system(HurstParam(cfg.hurst), 1);
  const OptimalTrajectory traj;
  const DriverSpec driver = adjoint_driver(model, traj, k, sys);
  BsdeOptions opt;
  opt.backend = Backend::Exact;
  opt.lambda = cfg.lambda;
  opt.gamma_exp = cfg.gamma_exp;
  return cauchy_diagnostic(driver, BsdeInputs{}, opt, truncations, theta, b);
}

DualityReport invest_duality(const InvestResult& result, const ControlProcess& direction,
                             const RegressionBasis& basis) {
  const InvestConfig& cfg = result.config;
  const long N = result.wealth.horizon();
  const ControlModel model = make_invest_model(cfg);
  const InnovationSystem sys = build_innovation_system(HurstParam(cfg.hurst), 1);
  OptimalTrajectory traj;
  traj.state = &result.wealth;
  traj.control = &result.control;
  traj.noise = &result.noise;
  const AdjointTriple adj{invest_k_closed_form(cfg, N).transpose(), solve_invest_adjoint(cfg, N)};
  BsdeOptions opt;
  opt.truncation = N;
  opt.backend = Backend::Regression;
  opt.lambda = cfg.lambda;
  opt.gamma_exp = cfg.gamma_exp;
  opt.basis = basis;
  return duality_check(model, traj, adj, sys, direction, opt);
}

double invest_cost(const InvestResult& result, const ControlProcess& control,
                   const RegressionBasis& basis) {
  const InvestConfig& cfg = result.config;
  BsdeOptions opt;
  opt.truncation = result.wealth.horizon();
  opt.backend = Backend::Regression;
  opt.lambda = cfg.lambda;
  opt.gamma_exp = cfg.gamma_exp;
  opt.basis = basis;
  return cost_functional(make_invest_model(cfg), control, result.noise,
                         Eigen::VectorXd::Constant(1, cfg.x0), opt);
}

namespace {

const char* kPlotScript = R"(import csv
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
shown = int(sys.argv[1]) if len(sys.argv) > 1 else 5

wealth = defaultdict(list)
control = defaultdict(list)
with open(os.path.join(here, "wealth.csv")) as fh:
    for row in csv.DictReader(fh):
        pid = int(row["path_id"])
        wealth[pid].append((int(row["n"]), float(row["X"])))
        control[pid].append((int(row["n"]), float(row["v"])))

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
for pid in sorted(wealth)[:shown]:
    n, x = zip(*wealth[pid])
    axes[0].plot(n, x, lw=1)
    n, v = zip(*control[pid])
    axes[1].plot(n, v, lw=1)
axes[0].set_title("wealth X*_n")
axes[1].set_title("investment v*_n")
for ax in axes:
    ax.set_xlabel("n")
fig.tight_layout()
fig.savefig(os.path.join(here, "invest.png"), dpi=150)
)";

}  // namespace

std::vector<std::filesystem::path> write_invest_artifacts(const InvestResult& result,
                                                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const long N = result.wealth.horizon();
  const Index P = result.wealth.paths();

  const auto wealth_csv = dir / "wealth.csv";
  {
    CsvWriter csv(wealth_csv, {"path_id", "n", "X", "v"});
    for (Index i = 0; i < P; ++i)
      for (long n = 0; n <= N; ++n) csv.row(i, n, result.wealth.values(i, n), result.control.values(i, n));
  }
  const auto adjoint_csv = dir / "adjoint.csv";
  {
    CsvWriter csv(adjoint_csv, {"n", "p", "q", "k"});
    for (long n = 0; n <= N; ++n) csv.row(n, result.p(n), result.q(n), result.k(n));
  }
  const auto traj_csv = dir / "trajectories.csv";
  {
    CsvWriter csv(traj_csv, {"path_id", "n", "X", "u", "xi"});
    for (Index i = 0; i < P; ++i)
      for (long n = 0; n <= N; ++n)
        csv.row(i, n, result.wealth.values(i, n), result.control.values(i, n), result.noise.noise(i, n));
  }
  const auto script = dir / "plot_invest.py";
  {
    std::ofstream out(script);
    if (!out) throw std::runtime_error("cannot open " + script.string() + " for writing");
    out << kPlotScript;
  }
  return {wealth_csv, adjoint_csv, traj_csv, script};
}

}  // namespace fracctrl
