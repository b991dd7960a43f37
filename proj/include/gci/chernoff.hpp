#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gci/families.hpp"
#include "gci/mgf.hpp"

namespace gci {

inline constexpr double kZMin = 1e-6;
inline constexpr double kZMax = 1.0 - 1e-6;

struct ChernoffDiagnostics {
  std::size_t grid_resolution = 0;
  std::size_t refinement_steps = 0;
  double quadrature_tol = 0.0;
  /// theta_star or gamma_star sits on a truncated face of its box.
  bool boundary_flag = false;
  bool separated = true;
  double min_kl = 0.0;
  std::size_t failed_cells = 0;
  std::vector<std::string> warnings;
};

struct ChernoffResult {
  double rho = 0.0;
  double z_star = 0.5;
  std::vector<double> theta_star;
  std::vector<double> gamma_star;
  ChernoffDiagnostics diagnostics;
};

/// Legendre transform m(t) = max_z [z t - Lambda(z)] of a pairwise spec.
/// Throws RangeError when t is outside the closure of the range of Lambda'.
double rate_function(const LogMgfSpec& spec, double t);

/// rho = max over z in (0, 1) of -Lambda(z) for g_theta against h_gamma.
ChernoffResult pairwise_index(const FamilyPtr& g, const std::vector<double>& theta,
                              const FamilyPtr& h, const std::vector<double>& gamma,
                              const quad::Options& quad = {});

struct IndexConfig {
  std::size_t grid_points = 41;
  std::size_t refine_starts = 5;
  std::size_t threads = 1;
  bool check_separation = true;
  double boundary_warning = 0.05;
  double xtol = 1e-7;
  quad::Options quad{};
};

/// min over the two boxes of the pairwise index: grid scan, then simplex
/// refinement from the best cells. Ties go to the lexicographically smallest
/// (theta, gamma).
ChernoffResult generalized_index(const FamilyPtr& g, const ParamBox& theta_box,
                                 const FamilyPtr& h, const ParamBox& gamma_box,
                                 const IndexConfig& config = {});

/// Pairwise index on a tensor grid; rows follow theta, columns gamma.
/// Cells that fail hold NaN.
struct RateGrid {
  std::vector<double> theta_axis;
  std::vector<double> gamma_axis;
  std::vector<std::vector<double>> rho;
};

RateGrid contour_grid(const FamilyPtr& g, const FamilyPtr& h,
                      const std::vector<double>& theta_axis,
                      const std::vector<double>& gamma_axis, std::size_t threads = 1,
                      const quad::Options& quad = {});

struct FamilyEntry {
  FamilyPtr family;
  ParamBox box;
  std::string label;
};

struct MultiFamilyRate {
  double rho = 0.0;
  /// Zero-based indices into the input list.
  std::pair<std::size_t, std::size_t> worst_pair{0, 1};
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, ChernoffResult>> pairs;
};

MultiFamilyRate multi_family_rate(const std::vector<FamilyEntry>& families,
                                  const IndexConfig& config = {});

}  // namespace gci
