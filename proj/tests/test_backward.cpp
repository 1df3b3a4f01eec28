#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fracctrl/backward.hpp"
#include "fracctrl/invest.hpp"
#include "oracles.hpp"

using namespace fracctrl;

namespace {

DriverSpec constant_driver(double c) {
  DriverSpec d;
  d.f = [c](const DriverArgs&) { return c; };
  return d;
}

BsdeOptions exact(long N, double lambda = 1.0, double g = 2.0) {
  BsdeOptions o;
  o.truncation = N;
  o.lambda = lambda;
  o.gamma_exp = g;
  return o;
}

}  // namespace

TEST_CASE("zero driver") {
  const BsdeSolution s = solve_truncated(constant_driver(0.0), {}, exact(5));
  CHECK(s.Y.isZero(0.0));
  CHECK(s.Z.isZero(0.0));
  CHECK(s.terminal_driver_defaulted);
}

TEST_CASE("constant driver against the closed sum") {
  for (double lambda : {0.5, 1.0}) {
    for (double g : {1.3, 2.0}) {
      const long N = 6;
      const BsdeSolution s = solve_truncated(constant_driver(2.0), {}, exact(N, lambda, g));
      for (long n = 0; n <= N; ++n)
        CHECK(s.Y(0, n) == doctest::Approx(oracle::constant_driver_y(2.0, lambda, g, N, n)).epsilon(1e-13));
    }
  }
  const BsdeSolution s = solve_truncated(constant_driver(1.0), {}, exact(3));
  CHECK(s.Y(0, 2) == doctest::Approx(std::exp(-5.0)).epsilon(1e-14));
  CHECK(s.Y(0, 3) == 0.0);
}

TEST_CASE("constant driver on an ensemble has Z = 0 under both backends") {
  const auto sys = build_innovation_system(HurstParam(0.7), 8);
  const NoiseEnsemble noise = sample_ensemble(sys, 3, 500);
  BsdeInputs in;
  in.noise = &noise;
  BsdeOptions o = exact(7, 1.0, 1.5);
  const BsdeSolution e = solve_truncated(constant_driver(1.0), in, o);
  CHECK(e.Z.isZero(0.0));
  o.backend = Backend::Regression;
  const BsdeSolution r = solve_truncated(constant_driver(1.0), in, o);
  CHECK(r.Z.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.Y - e.Y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("terminal driver is used at the truncation step") {
  DriverSpec d = constant_driver(1.0);
  d.f_terminal = [](const DriverArgs&) { return 10.0; };
  const BsdeSolution s = solve_truncated(d, {}, exact(2));
  CHECK_FALSE(s.terminal_driver_defaulted);
  CHECK(s.Y(0, 1) == doctest::Approx(10.0 * std::exp(-3.0)).epsilon(1e-14));
  CHECK(s.Y(0, 0) == doctest::Approx(std::exp(-1.0) * (10.0 * std::exp(-3.0) + 1.0)).epsilon(1e-14));
}

TEST_CASE("invest adjoint on two steps") {
  InvestConfig cfg;
  cfg.gamma_exp = 2.0;
  cfg.consumption_times = {2};
  const BsdeSolution p = solve_invest_adjoint(cfg, 2);
  CHECK(p.Y(0, 2) == 0.0);
  CHECK(p.Y(0, 1) == doctest::Approx(-1.5 * std::exp(-3.0)).epsilon(1e-14));
  CHECK(p.Y(0, 0) == doctest::Approx(std::exp(-1.0) * 1.05 * -1.5 * std::exp(-3.0)).epsilon(1e-14));
  CHECK(p.Z.isZero(0.0));
}

TEST_CASE("invest adjoint matches the hand recursion") {
  InvestConfig cfg;
  const long N = 40;
  const BsdeSolution p = solve_invest_adjoint(cfg, N);
  const Eigen::VectorXd k = invest_k_closed_form(cfg, N);
  const auto ref = oracle::adjoint_p(
      N, cfg.lambda, cfg.gamma_exp,
      [&](long n) { return cfg.consumes(n) ? (1 + cfg.r) * (1 - cfg.c) - 1 : cfg.r; },
      [&](long n) { return cfg.consumes(n) ? -cfg.Q : 0.0; }, [&](long n) { return k(n); });
  for (long n = 0; n <= N; ++n)
    CHECK(p.Y(0, n) == doctest::Approx(ref[static_cast<std::size_t>(n)]).epsilon(1e-12));
}

TEST_CASE("backend contracts") {
  const auto sys = build_innovation_system(HurstParam(0.6), 5);
  const NoiseEnsemble noise = sample_ensemble(sys, 4, 50);
  BsdeInputs in;
  in.noise = &noise;
  DriverSpec stochastic;
  stochastic.f = [&](const DriverArgs& a) { return noise.noise(a.path, a.n - 1); };
  CHECK_THROWS_AS(solve_truncated(stochastic, in, exact(4)), ContractError);

  BsdeOptions reg = exact(4);
  reg.backend = Backend::Regression;
  const NoiseEnsemble few = sample_ensemble(sys, 4, 5);
  BsdeInputs small;
  small.noise = &few;
  CHECK_THROWS_AS(solve_truncated(stochastic, small, reg), ContractError);
  CHECK_THROWS_AS(solve_truncated(stochastic, {}, reg), ContractError);
  CHECK_THROWS_AS(solve_truncated(constant_driver(0), {}, exact(0)), DomainError);

  Eigen::MatrixXd dup(20, 2);
  dup.col(0) = Eigen::VectorXd::LinSpaced(20, -1, 1);
  dup.col(1) = dup.col(0) * 2.0;
  CHECK_THROWS_AS(conditional_expectation(Eigen::VectorXd::Ones(20), dup, Backend::Regression, 1),
                  NumericalError);
  CHECK_THROWS_AS(conditional_expectation(Eigen::VectorXd::LinSpaced(20, 0, 1), dup, Backend::Exact),
                  ContractError);
}

TEST_CASE("monomial basis") {
  const auto e = monomial_exponents(2, 2);
  REQUIRE(e.size() == 6);
  CHECK(e[0] == std::vector<int>{0, 0});
  CHECK(monomial_exponents(3, 2).size() == 10);
  CHECK(monomial_exponents(0, 3).size() == 1);
}

TEST_CASE("conditional expectation") {
  Eigen::MatrixXd feat(4, 1);
  feat << 1, 2, 3, 4;
  CHECK(conditional_expectation(Eigen::VectorXd::Constant(4, 3.0), feat, Backend::Regression, 2)
            .isApprox(Eigen::VectorXd::Constant(4, 3.0), 1e-13));

  const auto sys = build_innovation_system(HurstParam(0.8), 4);
  const NoiseEnsemble noise = sample_ensemble(sys, 21, 100000);
  const Eigen::MatrixXd past = noise.noise.leftCols(3);
  const Eigen::VectorXd fit =
      conditional_expectation(noise.noise.col(3), past, Backend::Regression, 1);
  const double err = (fit - noise.prediction.col(3)).cwiseAbs().maxCoeff();
  CHECK(err < 0.02);

  // The residual is orthogonal to every basis function.
  const Eigen::VectorXd resid = noise.noise.col(3) - fit;
  for (Index j = 0; j < 3; ++j) CHECK(std::abs(resid.dot(past.col(j))) / resid.size() < 1e-10);
  CHECK(std::abs(resid.mean()) < 1e-10);
}

TEST_CASE("regression solution is adapted and order independent") {
  const auto sys = build_innovation_system(HurstParam(0.7), 6);
  NoiseEnsemble noise = sample_ensemble(sys, 8, 400);
  DriverSpec d;
  d.f = [](const DriverArgs& a) { return 0.1 * a.y + 1.0; };
  d.g = [](const DriverArgs& a) { return 0.5 + 0.0 * a.y; };
  BsdeInputs in;
  in.noise = &noise;
  BsdeOptions o = exact(5, 1.0, 1.5);
  o.backend = Backend::Regression;
  const BsdeSolution s = solve_truncated(d, in, o);
  CHECK(s.Y.col(5).isZero(0.0));
  // Y_0 sees no noise: identical on all paths.
  CHECK((s.Y.col(0).array() - s.Y(0, 0)).abs().maxCoeff() < 1e-12);

  std::vector<Index> perm(400);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  PathMatrix inn(400, noise.horizon());
  for (Index i = 0; i < 400; ++i) inn.row(i) = noise.innovations.row(perm[static_cast<std::size_t>(i)]);
  const NoiseEnsemble shuffled = ensemble_from_innovations(sys, inn);
  BsdeInputs in2;
  in2.noise = &shuffled;
  const BsdeSolution s2 = solve_truncated(d, in2, o);
  for (Index i = 0; i < 400; ++i)
    CHECK((s2.Y.row(i) - s.Y.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("truncation study") {
  const std::vector<long> ns{5, 10, 20};
  const CauchyReport zero = cauchy_diagnostic(constant_driver(0.0), {}, exact(1), ns, 2.0, 1.0);
  REQUIRE(zero.rows.size() == 2);
  for (const auto& r : zero.rows) CHECK(r.total == 0.0);

  const CauchyReport cst = cauchy_diagnostic(constant_driver(1.0), {}, exact(1, 1.0, 1.3), ns, 2.0, 1.0);
  CHECK(cst.monotone_decay);
  CHECK(cst.rows[1].total < cst.rows[0].total);
  CHECK_THROWS_AS(cauchy_diagnostic(constant_driver(1.0), {}, exact(1), std::vector<long>{5}, 2.0, 1.0),
                  DomainError);

  InvestConfig cfg;
  const std::vector<long> inv{20, 40, 80};
  const CauchyReport r = invest_adjoint_cauchy(cfg, inv, 2.0, 1.0);
  CHECK(r.monotone_decay);
  CHECK(r.rows[1].total / r.rows[0].total < 1.0);
}
