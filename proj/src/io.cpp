#include "fracctrl/io.hpp"

#include <cstdio>
#include <stdexcept>

namespace fracctrl {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::initializer_list<const char*> header)
    : out_(path) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  bool first = true;
  for (const char* h : header) {
    if (!first) out_ << ',';
    out_ << h;
    first = false;
  }
  out_ << '\n';
}

void write_triangular_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  CsvWriter csv(path, {"row", "col", "value"});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j <= i && j < m.cols(); ++j) csv.row(i, j, m(i, j));
}

void write_bsde_csv(const std::filesystem::path& path, const BsdeSolution& sol) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "path_id,n,Y,Z\n";
  for (Eigen::Index p = 0; p < sol.Y.rows(); ++p) {
    for (Eigen::Index n = 0; n < sol.Y.cols(); ++n) {
      out << p << ',' << n << ',' << format_real(sol.Y(p, n)) << ',';
      if (n < sol.Z.cols()) out << format_real(sol.Z(p, n));
      out << '\n';
    }
  }
}

nlohmann::json to_json(const CauchyReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const CauchyRow& r : report.rows) {
    rows.push_back({{"M", r.shorter},
                    {"N", r.longer},
                    {"y_norm", r.y_norm},
                    {"z_norm", r.z_norm},
                    {"total", r.total},
                    {"tail_term", r.tail_term}});
  }
  return {{"lambda", report.lambda},       {"gamma_exp", report.gamma_exp},
          {"theta", report.theta},         {"base_power", report.base_power},
          {"pairs", rows},                 {"monotone_decay", report.monotone_decay},
          {"tail_decay", report.tail_decay}};
}

nlohmann::json to_json(const NecessaryConditionReport& report) {
  nlohmann::json v = nlohmann::json::array();
  for (const ConditionViolation& c : report.violations)
    v.push_back({{"path", c.path}, {"n", c.n}, {"trial", c.trial}, {"value", c.value}});
  return {{"min_bracket_product", report.min_bracket_product},
          {"violations", v},
          {"violation_count", report.violation_count},
          {"tolerance", report.tolerance},
          {"trials", report.trials},
          {"evaluations", report.evaluations}};
}

nlohmann::json to_json(const ConvexityReport& report) {
  auto vec = [](const Eigen::VectorXd& x) {
    return std::vector<double>(x.data(), x.data() + x.size());
  };
  return {{"pairs", report.pairs},
          {"violations", report.violations},
          {"worst_gap", report.worst_gap},
          {"worst_first", vec(report.worst_first)},
          {"worst_second", vec(report.worst_second)}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

}  // namespace fracctrl
