#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fracctrl/invest.hpp"

namespace fracctrl {

enum ExitStatus : int { kExitOk = 0, kExitNumerical = 1, kExitConfig = 2 };

/// Everything a run depends on. Resolution order: defaults, --config file, --set pairs, flags.
struct RunConfig {
  std::string command;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir = "fracctrl_out";
  InvestConfig model;
  double theta = 2.0;
  double b = 1.0;
  std::vector<long> n_list = {20, 40, 80, 160};
  std::size_t trials = 100;
  double tolerance = 1e-8;
  long prefixes = 100;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// Applies the keys of a flat JSON object. Unknown keys and ill-typed values throw ConfigError.
void apply_config(RunConfig& cfg, const nlohmann::json& doc);

/// The resolved configuration as written to resolved_config.json.
nlohmann::json resolved_config(const RunConfig& cfg);

/// Parses "20,40,80" into integers.
std::vector<long> parse_int_list(const std::string& text);

int run_noise_check(const RunConfig& cfg, std::ostream& out);
int run_bsde_converge(const RunConfig& cfg, std::ostream& out);
int run_smp_check(const RunConfig& cfg, std::ostream& out);
int run_invest(const RunConfig& cfg, std::ostream& out);

/// Command-line entry point: returns 0 on success, 1 on numerical failure, 2 on config error.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fracctrl
