#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fracctrl/backward.hpp"
#include "fracctrl/forward.hpp"
#include "fracctrl/fracnoise.hpp"

namespace fracctrl {

/// Controlled state dynamics plus the running cost f(n, x, y, z, u) of the recursive cost
/// equation; `cost` must provide f and its partials f_x, f_y, f_z, f_u.
struct ControlModel {
  CoefficientSet dynamics;
  DriverSpec cost;
};

/// A candidate optimum and its processes on a shared ensemble. Any pointer may be null when the
/// corresponding quantity does not enter (e.g. partials independent of the state).
struct OptimalTrajectory {
  const StatePath* state = nullptr;      // X*, horizon N
  const ControlProcess* control = nullptr;  // u*, N + 1 columns
  const BsdeSolution* cost = nullptr;    // (Y*, Z*)
  const NoiseEnsemble* noise = nullptr;
};

/// (x, y, z, u) = (X*_n, Y*_n, Z*_n, u*_n) on `path`; absent pieces read as 0.
DriverArgs optimal_point(const OptimalTrajectory& traj, Index path, long n);

/// Scalar field over (path, step).
using PartialField = std::function<double(Index path, long n)>;

/// k_0 = 0, k_1 = -1, k_{n+1} = k_n + f_y(n) k_n + f_z(n) k_n eta_n for n >= 1.
/// One row per path (a single row when `noise` is null, which requires f_z = 0).
PathMatrix solve_adjoint_k(const PartialField& f_y, const PartialField& f_z,
                           const NoiseEnsemble* noise, long horizon);

/// Driver of the adjoint pair: f = b_x* y + beta(m,m) sigma_x* z - f_x* k_m, g = sigma_x* y.
/// The returned functions refer to every argument; they must outlive it.
DriverSpec adjoint_driver(const ControlModel& model, const OptimalTrajectory& traj,
                          const PathMatrix& k, const InnovationSystem& sys);

/// Adjoint pair (p, q):
///   e^{-l n^g}(p_n + q_n eta_n) = e^{-l(n+1)^g}(p_{n+1} + b_x* p_{n+1} + beta(n+1,n+1) sigma_x* q_{n+1}
///                                  - f_x* k_{n+1} + sigma_x* p_{n+1} E[xi_{n+1} | F_{n+1}])
/// truncated with p_N = 0, solved by solve_truncated. Without a noise ensemble the sigma_x*
/// terms must vanish along the trajectory.
BsdeSolution solve_adjoint_pq(const ControlModel& model, const OptimalTrajectory& traj,
                              const PathMatrix& k, const InnovationSystem& sys,
                              const BsdeOptions& options);

struct AdjointTriple {
  PathMatrix k;
  BsdeSolution pq;
};

struct HamiltonianEval {
  double value = 0.0;
  double h_x = 0.0;
  double h_u = 0.0;
};

/// H(n,x,y,z,u,p,q,k) = b p + sigma p E[xi_n | F_n] + beta(n,n) sigma q + f k,
/// with the prediction taken from the noise prefix xi_0..xi_{n-1}.
HamiltonianEval hamiltonian(const ControlModel& model, long n, double x, double y, double z,
                            double u, double p, double q, double k, const InnovationSystem& sys,
                            std::span<const double> noise_prefix);

/// b_u* p_n + sigma_u* p_n E[xi_n | F_n] + beta(n,n) sigma_u* q_n - f_u* k_n for n = 0..N
/// (p_N = q_N = 0), one row per path.
PathMatrix necessary_condition_bracket(const ControlModel& model, const OptimalTrajectory& traj,
                                       const AdjointTriple& adjoint, const InnovationSystem& sys);

struct ConditionViolation {
  Index path = 0;
  long n = 0;
  std::size_t trial = 0;
  double value = 0.0;
};

struct NecessaryConditionReport {
  double min_bracket_product = 0.0;
  std::size_t violation_count = 0;
  std::vector<ConditionViolation> violations;  // at most `max_listed`, in scan order
  double tolerance = 0.0;
  std::size_t trials = 0;
  std::size_t evaluations = 0;
};

/// Pointwise check of bracket(path, n) * (u_n - u*_n) >= -tolerance over every trial control,
/// path and step 0..steps-1 (steps = columns shared by bracket and controls).
NecessaryConditionReport check_necessary_condition(const PathMatrix& bracket,
                                                   const ControlProcess& optimal,
                                                   std::span<const ControlProcess> trials,
                                                   double tolerance, std::size_t max_listed = 100);

struct ConvexityReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double worst_gap = 0.0;  // max of H(mid) - (H(w1) + H(w2)) / 2
  Eigen::VectorXd worst_first;
  Eigen::VectorXd worst_second;
};

/// Midpoint-convexity test on random pairs from the box [lo, hi].
ConvexityReport verify_convexity(const std::function<double(const Eigen::VectorXd&)>& fn,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 std::size_t pairs, std::uint64_t seed, double tolerance);

struct DualityReport {
  double bracket_sum = 0.0;         // mean over paths of sum_n e^{-l n^g} bracket_n v_n
  double bracket_sum_stderr = 0.0;
  double variational_value = 0.0;  // Yh_0 from the variational cost equation
  BsdeSolution variational;
};

/// Compares sum_{n=0}^{N} E[e^{-l n^g} bracket_n v_n] with Yh_0, where Yh solves the variational
/// cost equation with driver f_x* Xh + f_y* Yh + f_z* Zh + f_u* v along the linearized state Xh.
DualityReport duality_check(const ControlModel& model, const OptimalTrajectory& traj,
                            const AdjointTriple& adjoint, const InnovationSystem& sys,
                            const ControlProcess& direction, const BsdeOptions& options);

/// J(u) = Y_0 of the cost equation driven by the state under open-loop control `control`.
/// Returns the ensemble mean of Y_0 (all paths agree at n = 0).
double cost_functional(const ControlModel& model, const ControlProcess& control,
                       const NoiseEnsemble& noise, const Eigen::VectorXd& x0,
                       const BsdeOptions& options);

}  // namespace fracctrl
