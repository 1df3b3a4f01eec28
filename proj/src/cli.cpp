#include "fracctrl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fracctrl/errors.hpp"
#include "fracctrl/io.hpp"
#include "fracctrl/rng.hpp"

namespace fracctrl {

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>)
        if (v.get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has an invalid value: " + v.dump());
  }
}

std::vector<long> get_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array of integers");
  std::vector<long> out;
  for (const json& e : v) out.push_back(get_as<long>(e, key));
  return out;
}

std::filesystem::path prepare_out(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  write_json(cfg.out_dir / "resolved_config.json", resolved_config(cfg));
  return cfg.out_dir;
}

}  // namespace

void apply_config(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  InvestConfig& m = cfg.model;
  for (const auto& [key, v] : doc.items()) {
    if (key == "mu") m.mu = get_as<double>(v, key);
    else if (key == "r") m.r = get_as<double>(v, key);
    else if (key == "sigma") m.sigma = get_as<double>(v, key);
    else if (key == "lambda") m.lambda = get_as<double>(v, key);
    else if (key == "beta_exp") m.beta_exp = get_as<double>(v, key);
    else if (key == "c") m.c = get_as<double>(v, key);
    else if (key == "Q") m.Q = get_as<double>(v, key);
    else if (key == "R") m.R = get_as<double>(v, key);
    else if (key == "consumption_period") m.consumption_period = get_as<long>(v, key);
    else if (key == "consumption_times") m.consumption_times = get_list(v, key);
    else if (key == "hurst") m.hurst = get_as<double>(v, key);
    else if (key == "x0") m.x0 = get_as<double>(v, key);
    else if (key == "horizon") m.horizon = get_as<long>(v, key);
    else if (key == "paths") m.paths = get_as<long>(v, key);
    else if (key == "seed") m.seed = get_as<std::uint64_t>(v, key);
    else if (key == "gamma_exp") m.gamma_exp = get_as<double>(v, key);
    else if (key == "truncation_margin") m.truncation_margin = get_as<long>(v, key);
    else if (key == "theta") cfg.theta = get_as<double>(v, key);
    else if (key == "b") cfg.b = get_as<double>(v, key);
    else if (key == "N_list") cfg.n_list = get_list(v, key);
    else if (key == "trials") cfg.trials = get_as<std::size_t>(v, key);
    else if (key == "tolerance") cfg.tolerance = get_as<double>(v, key);
    else if (key == "prefixes") cfg.prefixes = get_as<long>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

json resolved_config(const RunConfig& cfg) {
  const InvestConfig& m = cfg.model;
  return {{"command", cfg.command},
          {"mu", m.mu},
          {"r", m.r},
          {"sigma", m.sigma},
          {"lambda", m.lambda},
          {"beta_exp", m.beta_exp},
          {"c", m.c},
          {"Q", m.Q},
          {"R", m.R},
          {"consumption_period", m.consumption_period},
          {"consumption_times", m.consumption_times},
          {"hurst", m.hurst},
          {"x0", m.x0},
          {"horizon", m.horizon},
          {"paths", m.paths},
          {"seed", m.seed},
          {"gamma_exp", m.gamma_exp},
          {"truncation_margin", m.truncation_margin},
          {"theta", cfg.theta},
          {"b", cfg.b},
          {"N_list", cfg.n_list},
          {"trials", cfg.trials},
          {"tolerance", cfg.tolerance},
          {"prefixes", cfg.prefixes}};
}

std::vector<long> parse_int_list(const std::string& text) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("not an integer list: '" + text + "'");
    }
    if (used != item.size()) throw ConfigError("not an integer list: '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

int run_noise_check(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare_out(cfg);
  const long N = cfg.model.horizon;
  const InnovationSystem sys = build_innovation_system(HurstParam(cfg.model.hurst), N);

  const Eigen::MatrixXd cov = sys.covariance();
  const double cov_err = (sys.beta() * sys.beta().transpose() - cov).cwiseAbs().maxCoeff();
  const double inv_err =
      (sys.beta() * sys.alpha() - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
  const double gamma_max = sys.gamma().cwiseAbs().maxCoeff();

  const long prefixes = std::max(1L, cfg.prefixes);
  const NoiseEnsemble ens = sample_ensemble(sys, cfg.model.seed, prefixes);
  double oracle_err = 0.0;
  const long last = std::min(N - 1, 64L);
  for (long n = 1; n <= last; ++n) {
    Eigen::VectorXd r(n);
    for (long k = 0; k < n; ++k) r(k) = fgn_autocovariance<double>(HurstParam(cfg.model.hurst), n - k);
    const Eigen::VectorXd w = cov.topLeftCorner(n, n).ldlt().solve(r);
    for (Index p = 0; p < ens.paths(); ++p) {
      const auto prefix = ens.noise_prefix(p, n);
      const double direct = Eigen::Map<const Eigen::VectorXd>(prefix.data(), n).dot(w);
      oracle_err = std::max(oracle_err, std::abs(sys.predict_next(prefix) - direct));
    }
  }

  write_triangular_csv(dir / "beta.csv", sys.beta());
  write_triangular_csv(dir / "alpha.csv", sys.alpha());
  write_triangular_csv(dir / "gamma.csv", sys.gamma());
  const json report = {{"hurst", cfg.model.hurst},
                       {"horizon", N},
                       {"max_abs_beta_betaT_minus_cov", cov_err},
                       {"max_abs_beta_alpha_minus_identity", inv_err},
                       {"max_abs_gamma", gamma_max},
                       {"gamma_all_zero", gamma_max == 0.0},
                       {"prediction_oracle_max_error", oracle_err},
                       {"prediction_oracle_prefixes", prefixes}};
  write_json(dir / "noise_report.json", report);

  out << "H=" << cfg.model.hurst << " N=" << N << '\n'
      << "max|beta beta^T - Cov| = " << cov_err << '\n'
      << "max|beta alpha - I|    = " << inv_err << '\n'
      << "max|gamma(n,k)|        = " << gamma_max << (gamma_max == 0.0 ? " (all zero)" : "") << '\n'
      << "prediction oracle err  = " << oracle_err << '\n';
  return kExitOk;
}

int run_bsde_converge(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare_out(cfg);
  std::vector<long> list = cfg.n_list;
  const CauchyReport rep = invest_adjoint_cauchy(cfg.model, list, cfg.theta, cfg.b);
  write_json(dir / "cauchy.json", to_json(rep));
  const long longest = *std::max_element(list.begin(), list.end());
  write_bsde_csv(dir / "adjoint_pq.csv", solve_invest_adjoint(cfg.model, longest));

  out << "invest adjoint truncation study (lambda=" << rep.lambda << ", gamma_exp=" << rep.gamma_exp
      << ", theta=" << rep.theta << ", power=" << rep.base_power << ")\n";
  out << std::setw(6) << "M" << std::setw(6) << "N" << std::setw(16) << "diff(Y)" << std::setw(16)
      << "diff(Z)" << std::setw(16) << "total" << std::setw(16) << "tail" << '\n';
  for (const CauchyRow& r : rep.rows) {
    out << std::setw(6) << r.shorter << std::setw(6) << r.longer << std::setw(16) << r.y_norm
        << std::setw(16) << r.z_norm << std::setw(16) << r.total << std::setw(16) << r.tail_term
        << '\n';
  }
  out << "monotone decay: " << (rep.monotone_decay ? "yes" : "no") << '\n';
  return kExitOk;
}

int run_smp_check(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare_out(cfg);
  const InvestResult res = run_experiment(cfg.model);
  const InvestConfig& m = res.config;
  const long N = m.horizon;

  const double q_max = res.adjoint.Z.cwiseAbs().maxCoeff();
  const Eigen::VectorXd k_rec =
      solve_adjoint_k([&](Index, long) { return 0.5 * m.lambda; }, nullptr, nullptr, N).row(0).transpose();
  const double k_gap_abs = (res.k - k_rec).cwiseAbs().maxCoeff();

  const NecessaryConditionReport nc =
      invest_necessary_condition(res, cfg.trials, cfg.tolerance, derive_seed(m.seed, 1));

  // Hamiltonian in w = (x, y, z, u) at the first consumption time.
  long nh = N / 2;
  for (long n = 1; n <= N; ++n)
    if (m.consumes(n)) {
      nh = n;
      break;
    }
  const ControlModel model = make_invest_model(m);
  const InnovationSystem sys = build_innovation_system(HurstParam(m.hurst), N + 1);
  const auto prefix = res.noise.noise_prefix(0, nh);
  auto h = [&](const Eigen::VectorXd& w) {
    return hamiltonian(model, nh, w(0), w(1), w(2), w(3), res.p(nh), res.q(nh), res.k(nh), sys, prefix).value;
  };
  Eigen::Vector4d lo(0.0, -1.0, -1.0, 0.0), hi(2.0 * std::abs(m.x0), 1.0, 1.0, std::abs(m.x0));
  const ConvexityReport convex = verify_convexity(h, lo, hi, 2000, derive_seed(m.seed, 2), 1e-12);

  const ControlProcess trial = random_admissible_controls(m, res.wealth, 1, derive_seed(m.seed, 3)).front();
  ControlProcess direction = trial;
  direction.values = trial.values - res.control.values;
  const DualityReport dual = invest_duality(res, direction);

  json first_order = json::array();
  const double j_star = invest_cost(res, res.control);
  const double eps = 1e-3;
  const auto dirs = random_admissible_controls(m, res.wealth, 5, derive_seed(m.seed, 4));
  for (const ControlProcess& t : dirs) {
    const double j_eps = invest_cost(res, perturb_control(res.control, t, eps));
    first_order.push_back((j_eps - j_star) / eps);
  }

  json report = to_json(nc);
  report["q_max_abs"] = q_max;
  report["k_max_abs_gap"] = k_gap_abs;
  report["k_max_rel_gap"] = res.k_recursion_gap;
  report["convexity"] = to_json(convex);
  report["convexity"]["step"] = nh;
  report["duality"] = {{"bracket_sum", dual.bracket_sum},
                       {"bracket_sum_stderr", dual.bracket_sum_stderr},
                       {"variational_Y0", dual.variational_value},
                       {"abs_difference", std::abs(dual.bracket_sum - dual.variational_value)}};
  report["first_order"] = {{"J_star", j_star}, {"eps", eps}, {"directional_derivatives", first_order}};
  write_json(dir / "smp_report.json", report);

  out << "q max |q|                : " << q_max << '\n'
      << "k closed form vs recursion: abs " << k_gap_abs << ", rel " << res.k_recursion_gap << '\n'
      << "necessary condition      : " << nc.violation_count << " violations over " << nc.trials
      << " trials (min product " << nc.min_bracket_product << ", tol " << nc.tolerance << ")\n"
      << "Hamiltonian convexity    : " << convex.violations << " of " << convex.pairs
      << " midpoint pairs violate (worst gap " << convex.worst_gap << ")\n"
      << "duality                  : bracket sum " << dual.bracket_sum << " +- " << dual.bracket_sum_stderr
      << " vs Yhat_0 " << dual.variational_value << '\n';
  return kExitOk;
}

int run_invest(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare_out(cfg);
  const InvestResult res = run_experiment(cfg.model, dir);
  const long N = res.wealth.horizon();
  std::size_t outside = 0;
  for (Index i = 0; i < res.wealth.paths(); ++i)
    for (long n = 0; n <= N; ++n) {
      const double v = res.control.values(i, n);
      if (v < 0.0 || v > res.config.control_cap(n, res.wealth.values(i, n))) ++outside;
    }
  json artifacts = json::array();
  for (const auto& a : res.artifacts) artifacts.push_back(a.filename().string());
  write_json(dir / "invest_summary.json", {{"paths", res.wealth.paths()},
                                            {"horizon", N},
                                            {"mean_terminal_wealth", res.wealth.values.col(N).mean()},
                                            {"max_control", res.control.values.maxCoeff()},
                                            {"controls_outside_range", outside},
                                            {"clamped_low", res.clamped_low},
                                            {"clamped_high", res.clamped_high},
                                            {"artifacts", artifacts}});
  out << "invest H=" << res.config.hurst << " N=" << N << " paths=" << res.wealth.paths() << '\n'
      << "mean X_N = " << res.wealth.values.col(N).mean() << ", max v = " << res.control.values.maxCoeff()
      << ", controls outside [0, cap]: " << outside << '\n'
      << "wrote " << dir.string() << '\n';
  return kExitOk;
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-time control under fractional Gaussian noise"};
  app.require_subcommand(1);

  std::optional<std::string> config_path, out_dir, n_list;
  std::optional<double> hurst, theta, lambda, gamma_exp;
  std::optional<long> horizon, paths;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  const std::pair<const char*, const char*> commands[] = {
      {"noise-check", "innovation algebra and prediction oracle"},
      {"bsde-converge", "truncation study of the invest adjoint"},
      {"smp-check", "maximum-principle checks on the invest model"},
      {"invest", "optimal investment experiment"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--H", hurst, "Hurst parameter");
    sub->add_option("--N", horizon, "horizon");
    sub->add_option("--paths", paths, "number of paths");
    sub->add_option("--theta", theta, "delta-vector parameter");
    sub->add_option("--lambda", lambda, "discount rate");
    sub->add_option("--gamma-exp", gamma_exp, "discount exponent");
    sub->add_option("--N-list", n_list, "comma-separated truncations");
    sub->add_option("--set", sets, "key=value override")->take_all();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunConfig cfg;
  for (const CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();
  try {
    if (config_path) {
      cfg.config_path = *config_path;
      std::ifstream in(*config_path);
      if (!in) throw ConfigError("cannot read config file " + *config_path);
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config file " + *config_path + ": " + e.what());
      }
      apply_config(cfg, doc);
    }
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
      const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
      json value = json::parse(text, nullptr, false);
      if (value.is_discarded()) value = text;
      cfg.overrides.emplace_back(key, text);
      apply_config(cfg, json{{key, value}});
    }
    if (out_dir) cfg.out_dir = *out_dir;
    if (seed) cfg.model.seed = *seed;
    if (hurst) cfg.model.hurst = *hurst;
    if (horizon) cfg.model.horizon = *horizon;
    if (paths) cfg.model.paths = *paths;
    if (theta) cfg.theta = *theta;
    if (lambda) cfg.model.lambda = *lambda;
    if (gamma_exp) cfg.model.gamma_exp = *gamma_exp;
    if (n_list) cfg.n_list = parse_int_list(*n_list);
    cfg.model.validate();
    if (!(cfg.theta > 1.0)) throw ConfigError("theta must exceed 1");
    if (!(cfg.b >= 1.0)) throw ConfigError("b must be >= 1");

    if (cfg.command == "noise-check") return run_noise_check(cfg, out);
    if (cfg.command == "bsde-converge") return run_bsde_converge(cfg, out);
    if (cfg.command == "smp-check") return run_smp_check(cfg, out);
    return run_invest(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace fracctrl
