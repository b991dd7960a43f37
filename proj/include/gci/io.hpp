#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"

#include "gci/chernoff.hpp"
#include "gci/glm.hpp"
#include "gci/nonsep.hpp"
#include "gci/simulate.hpp"

namespace gci::io {

using json = nlohmann::json;

#ifndef GCI_VERSION
#define GCI_VERSION "0.0.0"
#endif
inline constexpr std::string_view kVersion = GCI_VERSION;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version{kVersion};
};

json to_json(const Provenance& p);
/// Comment lines ("# key=value") placed at the top of CSV artifacts.
void write_provenance_header(std::ostream& os, const Provenance& p);

/// Output precision: 6 significant digits, or round-trip precision when raw.
struct Precision {
  bool raw = false;
};

/// Rounds to 6 significant digits unless raw; NaN and infinities become null.
json number(double x, Precision prec);
std::string format_number(double x, Precision prec);
json numbers(std::span<const double> xs, Precision prec);
json numbers(const Eigen::VectorXd& xs, Precision prec);

json to_json(const ChernoffResult& r, Precision prec);
json to_json(const MultiFamilyRate& r, Precision prec);
/// {theta0, b, theta_dag, gamma_dag, lambda_dag, log_M_dag, rate, ...}
json to_json(const TiltedMeasure& t, Precision prec);
json to_json(const GaussianJointSaddle& s, Precision prec);
json to_json(const EulerDiagnostics& d, Precision prec);
json to_json(const FeasibilityReport& f, Precision prec);
json to_json(const GlmRate& r, Precision prec);
json to_json(const DesignCheck& d, Precision prec);
json to_json(const ISEstimate& e, Precision prec);
/// {slope, intercept, points_used, slope_se}
json to_json(const LineFit& f, Precision prec);

/// First row: corner label then the gamma axis; each further row: theta then
/// rho across gamma. Missing cells are written as NA.
void write_rate_grid_csv(std::ostream& os, const RateGrid& grid, const Provenance& prov,
                         Precision prec);
/// Inverse of write_rate_grid_csv; comment lines are skipped.
RateGrid read_rate_grid_csv(std::istream& is);

/// Columns n, p_hat, std_err, ess, method.
void write_decay_csv(std::ostream& os, const DecayCurve& curve, const Provenance& prov,
                     Precision prec);

}  // namespace gci::io
