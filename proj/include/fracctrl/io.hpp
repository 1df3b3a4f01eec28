#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <type_traits>

#include <Eigen/Dense>
#include <json.hpp>

#include "fracctrl/backward.hpp"
#include "fracctrl/fracnoise.hpp"
#include "fracctrl/smp.hpp"

namespace fracctrl {

/// 17 significant digits, printf %.17g.
std::string format_real(double v);

/// Plain comma-separated writer; throws std::runtime_error when the file cannot be opened.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<const char*> header);

  template <typename... Cols>
  void row(const Cols&... cols) {
    bool first = true;
    ((put(cols, first)), ...);
    out_ << '\n';
  }

 private:
  void sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }
  void put(double v, bool& first) { sep(first); out_ << format_real(v); }
  template <typename Int>
    requires std::is_integral_v<Int>
  void put(Int v, bool& first) { sep(first); out_ << v; }

  std::ofstream out_;
};

/// Lower-triangular entries (row, col, value) of an innovation-system matrix.
void write_triangular_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// (path_id, n, Y, Z); Z is blank at n = N.
void write_bsde_csv(const std::filesystem::path& path, const BsdeSolution& sol);

nlohmann::json to_json(const CauchyReport& report);
nlohmann::json to_json(const NecessaryConditionReport& report);
nlohmann::json to_json(const ConvexityReport& report);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace fracctrl
