#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gci/mgf.hpp"
#include "gci/nonsep.hpp"

namespace gci {

enum class Cumulant { gaussian, poisson, bernoulli };

Cumulant parse_cumulant(std::string_view name);
std::string to_string(Cumulant c);

/// b(u), b'(u), b''(u).
double cumulant_b(Cumulant c, double u);
double cumulant_b1(Cumulant c, double u);
double cumulant_b2(Cumulant c, double u);

/// Fixed-design canonical GLM: Y_i has natural parameter beta0' X_i under
/// the truth, beta' X_i under the null and gamma' Z_i under the alternative.
struct GlmDesign {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  Eigen::VectorXd beta0;
  Cumulant cumulant = Cumulant::gaussian;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  Eigen::Index q() const { return Z.cols(); }
  Eigen::VectorXd eta0() const { return X * beta0; }
};

struct DesignCheck {
  double max_row_norm_x = 0.0;
  double max_row_norm_z = 0.0;
  double min_eigen_x = 0.0;
  double min_eigen_z = 0.0;
  bool ok = false;
  std::vector<std::string> messages;
};

/// Row-norm bound and smallest eigenvalue of (1/n) X'X (and Z'Z).
DesignCheck check_design(const GlmDesign& design, double row_norm_bound = 1e6);

double rho_tilde(const GlmDesign& design, const Eigen::VectorXd& beta,
                 const Eigen::VectorXd& gamma, double lambda);
double rho_tilde_dlambda(const GlmDesign& design, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& gamma, double lambda);
double rho_tilde_d2lambda(const GlmDesign& design, const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& gamma, double lambda);

struct SupLambda {
  double lambda = 0.0;
  double value = 0.0;
};
/// sup over lambda of rho_tilde at fixed (beta, gamma).
SupLambda rho_tilde_sup_lambda(const GlmDesign& design, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& gamma);

struct BnMembership {
  bool member = false;
  double inf_value = 0.0;
  Eigen::VectorXd gamma_argmin;
  bool unbounded = false;
  std::string diagnostic;
};

/// beta is in B_n when inf_gamma d/dlambda rho_tilde(beta, gamma, 0) >= -1e-9.
BnMembership in_Bn_report(const GlmDesign& design, const Eigen::VectorXd& beta);
bool in_Bn(const GlmDesign& design, const Eigen::VectorXd& beta);

struct GlmRateConfig {
  std::size_t gamma_starts = 4;
  std::size_t beta_starts = 4;
  double xtol = 1e-8;
  std::uint64_t seed = 0;
};

struct GlmRate {
  double rho = 0.0;
  Eigen::VectorXd beta_dag;
  Eigen::VectorXd gamma_dag;
  double lambda_dag = 0.0;
  /// inf_gamma sup_lambda at beta0, a lower bound for rho.
  double rho_at_beta0 = 0.0;
  std::vector<std::string> warnings;
};

/// inf_gamma sup_lambda rho_tilde at fixed beta, with the minimising gamma.
struct MiddleGlm {
  double value = 0.0;
  Eigen::VectorXd gamma;
  double lambda = 0.0;
};
MiddleGlm glm_inf_gamma(const GlmDesign& design, const Eigen::VectorXd& beta,
                        const GlmRateConfig& config = {});

GlmRate glm_rate(const GlmDesign& design, const GlmRateConfig& config = {});

/// Response vectors with Y_i drawn at natural parameter
/// eta0_i + lambda (gamma' Z_i - beta' X_i). Replicate r uses stream r.
std::vector<Eigen::VectorXd> glm_tilted_sampler(const GlmDesign& design,
                                                const Eigen::VectorXd& beta,
                                                const Eigen::VectorXd& gamma, double lambda,
                                                std::size_t count, std::uint64_t seed);

/// One response vector at natural parameters eta.
Eigen::VectorXd draw_glm_response(Cumulant c, const Eigen::VectorXd& eta, CounterRng& rng);

/// Log-likelihood of y under natural parameters eta, without the c(y) term.
double glm_log_likelihood(Cumulant c, const Eigen::VectorXd& eta, const Eigen::VectorXd& y);

/// Canonical-link MLE by Newton/IRLS with step halving.
Eigen::VectorXd glm_mle(Cumulant c, const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        int max_iter = 100);

/// CSV with columns tagged x* / z* (other columns ignored) plus a JSON
/// sidecar {"beta0": [...], "cumulant": "gaussian|poisson|bernoulli"}.
GlmDesign load_design(const std::string& csv_path, const std::string& json_path);

// Joint Gaussian regression model with random covariates (X1, X2, Z1).
// Null: Y = theta1 X1 + theta2 X2 + e; alternative: Y = gamma1 X1 + gamma2 Z1 + e;
// unit noise variances. The observation is w = (X1, X2, Z1, Y).

struct GaussianJointModel {
  Eigen::Matrix3d sigma;
  Eigen::Vector2d beta0;
  double offset_b = 0.0;

  /// Covariance of w under the truth.
  Eigen::Matrix4d covariance() const;
  /// Quadratic form A with log h_gamma - log g_theta = w' A w.
  static Eigen::Matrix4d quadratic_form(const Eigen::Vector2d& theta, const Eigen::Vector2d& gamma);
  /// Closed-form log-MGF; throws DivergenceError when C^-1 - 2 lambda A is
  /// not positive definite.
  LogMgfValue log_mgf(const Eigen::Vector2d& theta, const Eigen::Vector2d& gamma,
                      double lambda) const;
  /// Covariance of w under the tilt.
  Eigen::Matrix4d tilted_covariance(const Eigen::Vector2d& theta, const Eigen::Vector2d& gamma,
                                    double lambda) const;
};

struct GaussianJointSaddle {
  Eigen::Vector2d theta_dag;
  Eigen::Vector2d gamma_dag;
  double lambda_dag = 0.0;
  double log_M_dag = 0.0;
  double rate = 0.0;
  bool multiple_optima = false;
  std::vector<std::string> warnings;
  ParamBox theta_box;
  ParamBox gamma_box;
};

struct GaussianJointConfig {
  double box_half_width = 10.0;
  TiltConfig tilt{};
};

GaussianJointSaddle gaussian_joint_saddle(const GaussianJointModel& model,
                                          const GaussianJointConfig& config = {});
double gaussian_joint_rate(const Eigen::Matrix3d& sigma, const Eigen::Vector2d& beta0,
                           double b = 0.0);

/// E_Q[grad_theta log g] and E_Q[grad_gamma log h] at the saddle, closed form.
EulerDiagnostics gaussian_joint_euler(const GaussianJointModel& model,
                                      const GaussianJointSaddle& saddle, double tolerance = 1e-4);

}  // namespace gci
