#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gci/families.hpp"
#include "gci/mgf.hpp"

namespace gci {

/// log E exp{lambda (log h_gamma - log g_theta - b)} under a fixed base law,
/// with its first two lambda-derivatives. Throws DivergenceError outside the
/// finiteness domain.
using TiltMgf = std::function<LogMgfValue(const std::vector<double>& theta,
                                          const std::vector<double>& gamma, double lambda)>;

/// inf over lambda >= 0 of the log-MGF at fixed (theta, gamma). When
/// Lambda'(0) >= 0 the event is not rare and the result is lambda = 0.
struct InnerSolution {
  double lambda = 0.0;
  double log_m = 0.0;
  double slope = 0.0;
  /// The infimum sits on the edge of the finiteness domain (no root of
  /// Lambda'), or Lambda' keeps its sign for every lambda probed.
  bool at_edge = false;
};

InnerSolution inner_lambda(const std::function<LogMgfValue(double)>& mgf, double tol = 1e-10,
                           double hint = 0.5);

struct TiltConfig {
  std::size_t theta_grid = 9;
  std::size_t gamma_grid = 15;
  std::size_t theta_starts = 3;
  /// Best gamma cell plus this many perturbed restarts.
  std::size_t gamma_perturbations = 4;
  /// Extra outer starting points (solve_tilt adds theta0).
  std::vector<std::vector<double>> theta_seeds;
  double lambda_tol = 1e-10;
  double xtol = 1e-7;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  quad::Options quad{};
};

struct Saddle {
  std::vector<double> theta;
  std::vector<double> gamma;
  double lambda = 0.0;
  double log_m = 0.0;
  bool multiple_optima = false;
  std::vector<std::string> warnings;
};

/// inf over theta, sup over gamma, inf over lambda of the log-MGF, by nested
/// grid-then-simplex searches. Independent of how the MGF is evaluated.
Saddle solve_minimax(const TiltMgf& mgf, const ParamBox& theta_box,
                     const std::vector<bool>& theta_log, const ParamBox& gamma_box,
                     const std::vector<bool>& gamma_log, const TiltConfig& config);

/// Q-dagger: density g_{theta0} (h_{gamma+}/g_{theta+})^{lambda+} e^{-lambda+ b} / M+.
struct TiltedMeasure {
  FamilyPtr gfam;
  FamilyPtr hfam;
  std::vector<double> theta0;
  double offset_b = 0.0;
  std::vector<double> theta_dag;
  std::vector<double> gamma_dag;
  double lambda_dag = 0.0;
  double log_M_dag = 0.0;
  bool multiple_optima = false;
  std::vector<std::string> warnings;

  LogMgfSpec mgf_spec(const quad::Options& quad = {}) const;
};

double rate_nonsep(const TiltedMeasure& tilt);

struct FeasibilityReport {
  double sup_expected_log_ratio = 0.0;
  std::vector<double> gamma_argmax;
  bool feasible = false;
  double inf_kl = 0.0;
  bool kl_positive = false;
};

FeasibilityReport feasibility_b(const FamilyPtr& g, const std::vector<double>& theta0,
                                const FamilyPtr& h, const ParamBox& gamma_box, double b,
                                std::size_t grid_points = 41, const quad::Options& quad = {});

/// Throws ParameterError when the feasibility check fails, DivergenceError
/// when the inner lambda has no root at the saddle.
TiltedMeasure solve_tilt(const FamilyPtr& g, const FamilyPtr& h, const ParamBox& theta_box,
                         const ParamBox& gamma_box, const std::vector<double>& theta0, double b,
                         const TiltConfig& config = {});

struct ScoreCheck {
  std::string name;
  std::size_t index = 0;
  double expected_score = 0.0;
  /// interior | lower | upper | pinned
  std::string position;
  bool pass = true;
};

struct EulerDiagnostics {
  std::vector<ScoreCheck> checks;
  double tolerance = 1e-4;
  bool pass = true;
};

/// Classifies each coordinate of a saddle as interior, on a face, or pinned
/// and applies the first-order conditions to the supplied expected scores.
EulerDiagnostics classify_scores(const std::vector<double>& theta_scores,
                                 const std::vector<double>& gamma_scores,
                                 const std::vector<double>& theta, const ParamBox& theta_box,
                                 const std::vector<double>& gamma, const ParamBox& gamma_box,
                                 double tolerance = 1e-4);

/// Expected scores of g_{theta+} and h_{gamma+} under Q-dagger by quadrature.
EulerDiagnostics euler_check(const TiltedMeasure& tilt, const ParamBox& theta_box,
                             const ParamBox& gamma_box, double tolerance = 1e-4,
                             const quad::Options& quad = {});

}  // namespace gci
