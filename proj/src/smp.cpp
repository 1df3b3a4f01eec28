#include "fracctrl/smp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fracctrl/errors.hpp"
#include "fracctrl/parallel.hpp"
#include "fracctrl/rng.hpp"

namespace fracctrl {

namespace {

Index row_of(const PathMatrix& m, Index path) { return m.rows() == 1 ? 0 : path; }

void require_partials(const ControlModel& model, bool need_cost_x) {
  const CoefficientSet& d = model.dynamics;
  if (!d.drift || !d.diffusion || !d.drift_x || !d.drift_u || !d.diffusion_x || !d.diffusion_u)
    throw ContractError("control model: dynamics and all first partials are required");
  const DriverSpec& c = model.cost;
  if (!c.f || !c.f_y || !c.f_z || !c.f_u || (need_cost_x && !c.f_x))
    throw ContractError("control model: cost driver partials f_x, f_y, f_z, f_u are required");
}

}  // namespace

DriverArgs optimal_point(const OptimalTrajectory& traj, Index path, long n) {
  DriverArgs a;
  a.path = path;
  a.n = n;
  if (traj.state && n <= traj.state->horizon()) a.x = traj.state->values(row_of(traj.state->values, path), n);
  if (traj.control && n < traj.control->steps())
    a.u = traj.control->values(row_of(traj.control->values, path), n);
  if (traj.cost) {
    if (n < traj.cost->Y.cols()) a.y = traj.cost->Y(row_of(traj.cost->Y, path), n);
    if (n < traj.cost->Z.cols()) a.z = traj.cost->Z(row_of(traj.cost->Z, path), n);
  }
  return a;
}

PathMatrix solve_adjoint_k(const PartialField& f_y, const PartialField& f_z,
                           const NoiseEnsemble* noise, long horizon) {
  if (horizon < 1) throw DomainError("solve_adjoint_k: horizon must be >= 1");
  if (!f_y) throw ContractError("solve_adjoint_k: f_y is required");
  if (noise && noise->horizon() < horizon - 1 + 1)
    throw RangeError("solve_adjoint_k: noise horizon shorter than requested k horizon");
  const Index paths = noise ? noise->paths() : 1;
  PathMatrix k = PathMatrix::Zero(paths, horizon + 1);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const auto p = static_cast<Index>(i);
    // Extended-precision running value: the product is rounded once per entry.
    long double kk = -1.0L;
    k(p, 1) = -1.0;
    for (long n = 1; n < horizon; ++n) {
      long double growth = 1.0L + static_cast<long double>(f_y(p, n));
      const double fz = f_z ? f_z(p, n) : 0.0;
      if (fz != 0.0) {
        if (!noise) throw ContractError("solve_adjoint_k: f_z != 0 needs a noise ensemble");
        growth += static_cast<long double>(fz) * noise->innovations(p, n);
      }
      kk *= growth;
      k(p, n + 1) = static_cast<double>(kk);
    }
  });
  if (!k.allFinite()) throw NumericalError("solve_adjoint_k: non-finite k", -1);
  return k;
}

DriverSpec adjoint_driver(const ControlModel& model, const OptimalTrajectory& traj,
                          const PathMatrix& k, const InnovationSystem& sys) {
  require_partials(model, true);
  const CoefficientSet& dyn = model.dynamics;
  const DriverSpec& cost = model.cost;
  const bool with_noise = traj.noise != nullptr;

  DriverSpec adj;
  adj.f = [&dyn, &cost, &traj, &k, &sys, with_noise](const DriverArgs& a) {
    if (a.n >= k.cols()) throw ContractError("adjoint driver: k must cover steps 0..N");
    const DriverArgs pt = optimal_point(traj, a.path, a.n);
    const double bx = dyn.drift_x(a.n, pt.x, pt.u);
    const double sx = dyn.diffusion_x(a.n, pt.x, pt.u);
    if (!with_noise && sx != 0.0)
      throw ContractError("adjoint driver: sigma_x does not vanish; a noise ensemble is required");
    double v = bx * a.y - cost.f_x(pt) * k(row_of(k, a.path), a.n);
    if (sx != 0.0 && a.z != 0.0) v += sys.beta(a.n, a.n) * sx * a.z;
    return v;
  };
  adj.f_terminal = [f = adj.f](const DriverArgs& a) {
    DriverArgs t = a;
    t.z = 0.0;
    return f(t);
  };
  if (with_noise) {
    adj.g = [&dyn, &traj](const DriverArgs& a) {
      const DriverArgs pt = optimal_point(traj, a.path, a.n);
      return dyn.diffusion_x(a.n, pt.x, pt.u) * a.y;
    };
    adj.g_terminal = adj.g;
  }
  return adj;
}

BsdeSolution solve_adjoint_pq(const ControlModel& model, const OptimalTrajectory& traj,
                              const PathMatrix& k, const InnovationSystem& sys,
                              const BsdeOptions& options) {
  if (k.cols() < options.truncation + 1)
    throw ContractError("solve_adjoint_pq: k must cover steps 0..N");
  const DriverSpec adj = adjoint_driver(model, traj, k, sys);
  BsdeInputs inputs;
  inputs.noise = traj.noise;
  if (traj.state && traj.state->horizon() >= options.truncation) inputs.state = traj.state;
  return solve_truncated(adj, inputs, options);
}

HamiltonianEval hamiltonian(const ControlModel& model, long n, double x, double y, double z,
                            double u, double p, double q, double k, const InnovationSystem& sys,
                            std::span<const double> noise_prefix) {
  require_partials(model, true);
  if (static_cast<long>(noise_prefix.size()) != n)
    throw ContractError("hamiltonian: noise prefix must hold xi_0..xi_{n-1}");
  const CoefficientSet& d = model.dynamics;
  const double pred = sys.predict_next(noise_prefix);
  const double bnn = sys.beta(n, n);
  const DriverArgs a{0, n, x, y, z, u};
  HamiltonianEval h;
  h.value = d.drift(n, x, u) * p + d.diffusion(n, x, u) * p * pred + bnn * d.diffusion(n, x, u) * q +
            model.cost.f(a) * k;
  h.h_x = d.drift_x(n, x, u) * p + d.diffusion_x(n, x, u) * p * pred +
          bnn * d.diffusion_x(n, x, u) * q + model.cost.f_x(a) * k;
  h.h_u = d.drift_u(n, x, u) * p + d.diffusion_u(n, x, u) * p * pred +
          bnn * d.diffusion_u(n, x, u) * q + model.cost.f_u(a) * k;
  return h;
}

PathMatrix necessary_condition_bracket(const ControlModel& model, const OptimalTrajectory& traj,
                                       const AdjointTriple& adjoint, const InnovationSystem& sys) {
  require_partials(model, false);
  const BsdeSolution& pq = adjoint.pq;
  long N = pq.truncation;
  if (traj.state) N = std::min(N, traj.state->horizon());
  if (traj.control) N = std::min(N, static_cast<long>(traj.control->steps()) - 1);
  if (N < 0) throw ContractError("necessary_condition_bracket: empty trajectory");
  if (adjoint.k.cols() < N + 1) throw ContractError("necessary_condition_bracket: k too short");

  Index paths = pq.paths();
  if (traj.noise) paths = traj.noise->paths();
  else if (traj.state) paths = traj.state->paths();
  const CoefficientSet& d = model.dynamics;

  PathMatrix out(paths, N + 1);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
    const auto path = static_cast<Index>(i);
    const Index r = row_of(pq.Y, path);
    for (long n = 0; n <= N; ++n) {
      const DriverArgs pt = optimal_point(traj, path, n);
      const double P = n < pq.truncation ? pq.Y(r, n) : 0.0;
      const double Q = n < pq.truncation ? pq.Z(row_of(pq.Z, path), n) : 0.0;
      using ld = long double;
      ld v = -static_cast<ld>(model.cost.f_u(pt)) * adjoint.k(row_of(adjoint.k, path), n);
      if (P != 0.0) {
        v += static_cast<ld>(d.drift_u(n, pt.x, pt.u)) * P;
        const double su = d.diffusion_u(n, pt.x, pt.u);
        if (su != 0.0 && n > 0) {
          if (!traj.noise || n >= traj.noise->horizon())
            throw ContractError("necessary_condition_bracket: predictions needed up to step N");
          v += static_cast<ld>(su) * P * traj.noise->prediction(path, n);
        }
      }
      if (Q != 0.0) v += static_cast<ld>(sys.beta(n, n)) * d.diffusion_u(n, pt.x, pt.u) * Q;
      out(path, n) = static_cast<double>(v);
    }
  });
  return out;
}

NecessaryConditionReport check_necessary_condition(const PathMatrix& bracket,
                                                   const ControlProcess& optimal,
                                                   std::span<const ControlProcess> trials,
                                                   double tolerance, std::size_t max_listed) {
  if (bracket.rows() != optimal.paths())
    throw ContractError("check_necessary_condition: bracket and control path counts differ");
  NecessaryConditionReport rep;
  rep.tolerance = tolerance;
  rep.trials = trials.size();
  rep.min_bracket_product = HUGE_VAL;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const ControlProcess& trial = trials[t];
    if (trial.paths() != optimal.paths())
      throw ContractError("check_necessary_condition: trial control path count differs");
    const Index steps = std::min({bracket.cols(), optimal.steps(), trial.steps()});
    for (Index p = 0; p < bracket.rows(); ++p) {
      for (Index n = 0; n < steps; ++n) {
        const double v = bracket(p, n) * (trial.values(p, n) - optimal.values(p, n));
        ++rep.evaluations;
        rep.min_bracket_product = std::min(rep.min_bracket_product, v);
        if (v < -tolerance) {
          ++rep.violation_count;
          if (rep.violations.size() < max_listed) rep.violations.push_back({p, static_cast<long>(n), t, v});
        }
      }
    }
  }
  if (rep.evaluations == 0) rep.min_bracket_product = 0.0;
  return rep;
}

ConvexityReport verify_convexity(const std::function<double(const Eigen::VectorXd&)>& fn,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 std::size_t pairs, std::uint64_t seed, double tolerance) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw DomainError("verify_convexity: box bounds must be non-empty and of equal size");
  if (((hi - lo).array() < 0.0).any()) throw DomainError("verify_convexity: lo must not exceed hi");
  NormalStream rng(seed);
  ConvexityReport rep;
  rep.pairs = pairs;
  rep.worst_gap = -HUGE_VAL;
  Eigen::VectorXd a(lo.size()), b(lo.size());
  for (std::size_t i = 0; i < pairs; ++i) {
    for (Index j = 0; j < lo.size(); ++j) {
      a(j) = lo(j) + (hi(j) - lo(j)) * rng.uniform();
      b(j) = lo(j) + (hi(j) - lo(j)) * rng.uniform();
    }
    const double gap = fn(0.5 * (a + b)) - 0.5 * (fn(a) + fn(b));
    if (gap > tolerance) ++rep.violations;
    if (gap > rep.worst_gap) {
      rep.worst_gap = gap;
      rep.worst_first = a;
      rep.worst_second = b;
    }
  }
  return rep;
}

DualityReport duality_check(const ControlModel& model, const OptimalTrajectory& traj,
                            const AdjointTriple& adjoint, const InnovationSystem& sys,
                            const ControlProcess& direction, const BsdeOptions& options) {
  require_partials(model, true);
  if (!traj.state || !traj.control || !traj.noise)
    throw ContractError("duality_check: state, control and noise ensembles are required");
  const long N = adjoint.pq.truncation;
  if (options.truncation != N)
    throw ContractError("duality_check: variational and adjoint truncations must agree");
  if (traj.state->horizon() < N || direction.steps() < N + 1 || traj.control->steps() < N + 1)
    throw ContractError("duality_check: trajectory and direction must cover steps 0..N");

  const PathMatrix bracket = necessary_condition_bracket(model, traj, adjoint, sys);
  if (bracket.cols() != N + 1) throw ContractError("duality_check: bracket does not reach N");

  DualityReport rep;
  const Index paths = traj.noise->paths();
  Eigen::VectorXd per_path = Eigen::VectorXd::Zero(paths);
  for (long n = 0; n <= N; ++n) {
    const double dn = discount(options.lambda, options.gamma_exp, n);
    per_path += dn * bracket.col(n).cwiseProduct(direction.values.col(n));
  }
  rep.bracket_sum = per_path.mean();
  if (paths > 1) {
    const double var = (per_path.array() - rep.bracket_sum).square().sum() / static_cast<double>(paths - 1);
    rep.bracket_sum_stderr = std::sqrt(var / static_cast<double>(paths));
  }

  StatePath xh = simulate_variation(model.dynamics, *traj.state, *traj.control, direction, *traj.noise);
  const DriverSpec& cost = model.cost;
  DriverSpec var;
  var.f = [&](const DriverArgs& a) {
    const DriverArgs pt = optimal_point(traj, a.path, a.n);
    return cost.f_x(pt) * a.x + cost.f_y(pt) * a.y + cost.f_z(pt) * a.z + cost.f_u(pt) * a.u;
  };
  BsdeInputs inputs;
  inputs.state = &xh;
  inputs.control = &direction;
  inputs.noise = traj.noise;
  rep.variational = solve_truncated(var, inputs, options);
  rep.variational_value = rep.variational.Y.col(0).mean();
  return rep;
}

double cost_functional(const ControlModel& model, const ControlProcess& control,
                       const NoiseEnsemble& noise, const Eigen::VectorXd& x0,
                       const BsdeOptions& options) {
  const StatePath state = simulate_state(model.dynamics, control, noise, x0, options.truncation);
  BsdeInputs inputs;
  inputs.state = &state;
  inputs.control = &control;
  inputs.noise = &noise;
  return solve_truncated(model.cost, inputs, options).Y.col(0).mean();
}

}  // namespace fracctrl
