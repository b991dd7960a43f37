#include "gci/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gci/error.hpp"

namespace gci::io {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json to_json(const Provenance& p) {
  return {{"command", p.command},
          {"config_hash", hex64(p.config_hash)},
          {"seed", p.seed},
          {"version", p.version}};
}

void write_provenance_header(std::ostream& os, const Provenance& p) {
  os << "# gci " << p.version << "\n"
     << "# command=" << p.command << "\n"
     << "# config_hash=" << hex64(p.config_hash) << "\n"
     << "# seed=" << p.seed << "\n";
}

std::string format_number(double x, Precision prec) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, prec.raw ? "%.17g" : "%.6g", x);
  return buf;
}

json number(double x, Precision prec) {
  if (!std::isfinite(x)) return nullptr;
  if (prec.raw) return x;
  // Parse the 6-digit text back so the JSON value prints short.
  return std::strtod(format_number(x, prec).c_str(), nullptr);
}

json numbers(std::span<const double> xs, Precision prec) {
  json a = json::array();
  for (double x : xs) a.push_back(number(x, prec));
  return a;
}

json numbers(const Eigen::VectorXd& xs, Precision prec) {
  return numbers(std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())), prec);
}

json to_json(const ChernoffResult& r, Precision prec) {
  const auto& d = r.diagnostics;
  return {{"rho", number(r.rho, prec)},
          {"z_star", number(r.z_star, prec)},
          {"theta_star", numbers(r.theta_star, prec)},
          {"gamma_star", numbers(r.gamma_star, prec)},
          {"diagnostics",
           {{"grid_resolution", d.grid_resolution},
            {"refinement_steps", d.refinement_steps},
            {"quadrature_tol", d.quadrature_tol},
            {"boundary_flag", d.boundary_flag},
            {"separated", d.separated},
            {"min_kl", number(d.min_kl, prec)},
            {"failed_cells", d.failed_cells},
            {"warnings", d.warnings}}}};
}

json to_json(const MultiFamilyRate& r, Precision prec) {
  json pairs = json::array();
  for (const auto& [ij, res] : r.pairs) {
    json p = to_json(res, prec);
    p["pair"] = {ij.first, ij.second};
    pairs.push_back(std::move(p));
  }
  return {{"rho", number(r.rho, prec)},
          {"worst_pair", {r.worst_pair.first, r.worst_pair.second}},
          {"pairs", pairs}};
}

json to_json(const TiltedMeasure& t, Precision prec) {
  return {{"null_family", t.gfam ? t.gfam->id() : ""},
          {"alternative_family", t.hfam ? t.hfam->id() : ""},
          {"theta0", numbers(t.theta0, prec)},
          {"b", number(t.offset_b, prec)},
          {"theta_dag", numbers(t.theta_dag, prec)},
          {"gamma_dag", numbers(t.gamma_dag, prec)},
          {"lambda_dag", number(t.lambda_dag, prec)},
          {"log_M_dag", number(t.log_M_dag, prec)},
          {"rate", number(rate_nonsep(t), prec)},
          {"multiple_optima", t.multiple_optima},
          {"warnings", t.warnings}};
}

json to_json(const GaussianJointSaddle& s, Precision prec) {
  return {{"theta_dag", numbers(s.theta_dag, prec)},
          {"gamma_dag", numbers(s.gamma_dag, prec)},
          {"lambda_dag", number(s.lambda_dag, prec)},
          {"log_M_dag", number(s.log_M_dag, prec)},
          {"rate", number(s.rate, prec)},
          {"multiple_optima", s.multiple_optima},
          {"warnings", s.warnings}};
}

json to_json(const EulerDiagnostics& d, Precision prec) {
  json checks = json::array();
  for (const auto& c : d.checks)
    checks.push_back({{"name", c.name},
                      {"index", c.index},
                      {"expected_score", number(c.expected_score, prec)},
                      {"position", c.position},
                      {"pass", c.pass}});
  return {{"pass", d.pass}, {"tolerance", d.tolerance}, {"checks", checks}};
}

json to_json(const FeasibilityReport& f, Precision prec) {
  return {{"sup_expected_log_ratio", number(f.sup_expected_log_ratio, prec)},
          {"gamma_argmax", numbers(f.gamma_argmax, prec)},
          {"feasible", f.feasible},
          {"inf_kl", number(f.inf_kl, prec)},
          {"kl_positive", f.kl_positive}};
}

json to_json(const GlmRate& r, Precision prec) {
  return {{"rho", number(r.rho, prec)},
          {"beta_dag", numbers(r.beta_dag, prec)},
          {"gamma_dag", numbers(r.gamma_dag, prec)},
          {"lambda_dag", number(r.lambda_dag, prec)},
          {"rho_at_beta0", number(r.rho_at_beta0, prec)},
          {"warnings", r.warnings}};
}

json to_json(const DesignCheck& d, Precision prec) {
  return {{"ok", d.ok},
          {"max_row_norm_x", number(d.max_row_norm_x, prec)},
          {"max_row_norm_z", number(d.max_row_norm_z, prec)},
          {"min_eigen_x", number(d.min_eigen_x, prec)},
          {"min_eigen_z", number(d.min_eigen_z, prec)},
          {"messages", d.messages}};
}

json to_json(const ISEstimate& e, Precision prec) {
  return {{"p_hat", number(e.p_hat, prec)},
          {"std_err", number(e.std_err, prec)},
          {"rel_err", number(e.rel_err, prec)},
          {"ess", number(e.ess, prec)},
          {"reps", e.reps},
          {"method", to_string(e.method)},
          {"low_ess", e.low_ess},
          {"truncated", e.truncated},
          {"warnings", e.warnings}};
}

json to_json(const LineFit& f, Precision prec) {
  return {{"slope", number(f.slope, prec)},
          {"intercept", number(f.intercept, prec)},
          {"points_used", f.points_used},
          {"slope_se", number(f.slope_se, prec)}};
}

void write_rate_grid_csv(std::ostream& os, const RateGrid& grid, const Provenance& prov,
                         Precision prec) {
  write_provenance_header(os, prov);
  os << "theta\\gamma";
  for (double g : grid.gamma_axis) os << ',' << format_number(g, prec);
  os << '\n';
  for (std::size_t i = 0; i < grid.theta_axis.size(); ++i) {
    os << format_number(grid.theta_axis[i], prec);
    for (std::size_t j = 0; j < grid.gamma_axis.size(); ++j) os << ',' << format_number(grid.rho[i][j], prec);
    os << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s) {
  if (s == "NA" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("rate grid: bad cell '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("rate grid: bad cell '" + s + "'");
  return v;
}

}  // namespace

RateGrid read_rate_grid_csv(std::istream& is) {
  RateGrid g;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv(line);
    if (!header) {
      for (std::size_t j = 1; j < cells.size(); ++j) g.gamma_axis.push_back(parse_cell(cells[j]));
      header = true;
      continue;
    }
    if (cells.size() != g.gamma_axis.size() + 1) throw ConfigError("rate grid: ragged row");
    g.theta_axis.push_back(parse_cell(cells[0]));
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(parse_cell(cells[j]));
    g.rho.push_back(std::move(row));
  }
  if (!header) throw ConfigError("rate grid: no header row");
  return g;
}

void write_decay_csv(std::ostream& os, const DecayCurve& curve, const Provenance& prov,
                     Precision prec) {
  write_provenance_header(os, prov);
  os << "# side=" << to_string(curve.side) << "\n";
  os << "n,p_hat,std_err,ess,method\n";
  for (std::size_t i = 0; i < curve.sample_sizes.size(); ++i) {
    const auto& e = curve.estimates[i];
    os << curve.sample_sizes[i] << ',' << format_number(e.p_hat, prec) << ','
       << format_number(e.std_err, prec) << ',' << format_number(e.ess, prec) << ','
       << to_string(e.method) << '\n';
  }
}

}  // namespace gci::io
