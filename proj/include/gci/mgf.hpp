#pragma once

#include <vector>

#include "gci/families.hpp"
#include "gci/quadrature.hpp"

namespace gci {

/// Log-MGF of the per-observation log-likelihood ratio
///   l(x) = log h_gamma(x) - log g_theta(x) - b
/// under a base law. The base is g at `base_params` unless `base_family` is
/// set (the swap identity uses h as the base).
struct LogMgfSpec {
  FamilyPtr gfam;
  FamilyPtr hfam;
  std::vector<double> base_params;
  std::vector<double> g_params;
  std::vector<double> h_params;
  double offset_b = 0.0;
  FamilyPtr base_family;
  quad::Options quad{};

  const FamilyModel& base() const { return base_family ? *base_family : *gfam; }

  /// theta0 = theta, b = 0.
  static LogMgfSpec pairwise(FamilyPtr g, std::vector<double> theta, FamilyPtr h,
                             std::vector<double> gamma);
};

struct LogMgfValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Throws DivergenceError when lambda lies outside the finiteness domain.
double log_mgf(const LogMgfSpec& spec, double lambda);
double log_mgf_deriv(const LogMgfSpec& spec, double lambda, int order);
/// Value and first two derivatives from one quadrature pass.
LogMgfValue log_mgf_all(const LogMgfSpec& spec, double lambda);

/// E_base[l(X)] (includes the -b offset).
double expected_log_ratio(const LogMgfSpec& spec);

/// Validates families, supports, and parameter vectors.
void validate(const LogMgfSpec& spec);

}  // namespace gci
