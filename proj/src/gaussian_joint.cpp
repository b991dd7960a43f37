#include <cmath>

#include "gci/error.hpp"
#include "gci/glm.hpp"

namespace gci {

Eigen::Matrix4d GaussianJointModel::covariance() const {
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  c.topLeftCorner<3, 3>() = sigma;
  const Eigen::Vector3d cy = sigma.leftCols<2>() * beta0;
  c.block<3, 1>(0, 3) = cy;
  c.block<1, 3>(3, 0) = cy.transpose();
  c(3, 3) = beta0.dot(sigma.topLeftCorner<2, 2>() * beta0) + 1.0;
  return c;
}

Eigen::Matrix4d GaussianJointModel::quadratic_form(const Eigen::Vector2d& theta,
                                                   const Eigen::Vector2d& gamma) {
  // Residuals: y - theta'x = u'w and y - gamma1 x1 - gamma2 z1 = v'w.
  const Eigen::Vector4d u(-theta[0], -theta[1], 0.0, 1.0);
  const Eigen::Vector4d v(-gamma[0], 0.0, -gamma[1], 1.0);
  return 0.5 * (u * u.transpose() - v * v.transpose());
}

namespace {

struct Whitened {
  Eigen::Matrix4d L;
  Eigen::Vector4d mu;
  Eigen::Matrix4d vecs;
};

Whitened whiten(const GaussianJointModel& m, const Eigen::Vector2d& theta,
                const Eigen::Vector2d& gamma) {
  Eigen::LLT<Eigen::Matrix4d> llt(m.covariance());
  if (llt.info() != Eigen::Success) throw ParameterError("joint covariance is not positive definite");
  Whitened w;
  w.L = llt.matrixL();
  const Eigen::Matrix4d M = w.L.transpose() * GaussianJointModel::quadratic_form(theta, gamma) * w.L;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(0.5 * (M + M.transpose()));
  w.mu = es.eigenvalues();
  w.vecs = es.eigenvectors();
  return w;
}

}  // namespace

LogMgfValue GaussianJointModel::log_mgf(const Eigen::Vector2d& theta, const Eigen::Vector2d& gamma,
                                        double lambda) const {
  const Whitened w = whiten(*this, theta, gamma);
  LogMgfValue v;
  for (int k = 0; k < 4; ++k) {
    const double r = 1.0 - 2.0 * lambda * w.mu[k];
    if (!(r > 0.0)) {
      throw DivergenceError("joint Gaussian tilt leaves the positive-definite cone", "quadratic form");
    }
    v.value += -0.5 * std::log(r);
    v.d1 += w.mu[k] / r;
    v.d2 += 2.0 * w.mu[k] * w.mu[k] / (r * r);
  }
  if (lambda == 0.0) v.value = 0.0;
  v.value -= lambda * offset_b;
  v.d1 -= offset_b;
  return v;
}

Eigen::Matrix4d GaussianJointModel::tilted_covariance(const Eigen::Vector2d& theta,
                                                      const Eigen::Vector2d& gamma,
                                                      double lambda) const {
  const Whitened w = whiten(*this, theta, gamma);
  Eigen::Vector4d d;
  for (int k = 0; k < 4; ++k) {
    const double r = 1.0 - 2.0 * lambda * w.mu[k];
    if (!(r > 0.0)) throw DivergenceError("joint Gaussian tilt is not normalisable", "quadratic form");
    d[k] = 1.0 / r;
  }
  const Eigen::Matrix4d B = w.L * w.vecs;
  return B * d.asDiagonal() * B.transpose();
}

GaussianJointSaddle gaussian_joint_saddle(const GaussianJointModel& model,
                                          const GaussianJointConfig& config) {
  const double w = config.box_half_width;
  GaussianJointSaddle out;
  out.theta_box = ParamBox({-w, -w}, {w, w}, {true, true}, {true, true});
  out.gamma_box = out.theta_box;
  TiltMgf mgf = [&](const std::vector<double>& th, const std::vector<double>& ga, double l) {
    return model.log_mgf(Eigen::Vector2d(th[0], th[1]), Eigen::Vector2d(ga[0], ga[1]), l);
  };
  TiltConfig tilt = config.tilt;
  tilt.theta_seeds.push_back({model.beta0[0], model.beta0[1]});
  const Saddle s = solve_minimax(mgf, out.theta_box, {false, false}, out.gamma_box, {false, false},
                                 tilt);
  out.theta_dag = Eigen::Vector2d(s.theta[0], s.theta[1]);
  out.gamma_dag = Eigen::Vector2d(s.gamma[0], s.gamma[1]);
  out.lambda_dag = s.lambda;
  out.log_M_dag = s.log_m;
  out.rate = -s.log_m;
  out.multiple_optima = s.multiple_optima;
  out.warnings = s.warnings;
  const std::vector<double> th(s.theta), ga(s.gamma);
  if (out.theta_box.near_truncated_face(th, 0.05) || out.gamma_box.near_truncated_face(ga, 0.05)) {
    out.warnings.push_back("saddle within 5% of a truncated bound");
  }
  return out;
}

double gaussian_joint_rate(const Eigen::Matrix3d& sigma, const Eigen::Vector2d& beta0, double b) {
  GaussianJointModel m{sigma, beta0, b};
  return gaussian_joint_saddle(m).rate;
}

EulerDiagnostics gaussian_joint_euler(const GaussianJointModel& model,
                                      const GaussianJointSaddle& saddle, double tolerance) {
  const Eigen::Matrix4d S =
      model.tilted_covariance(saddle.theta_dag, saddle.gamma_dag, saddle.lambda_dag);
  const Eigen::Vector4d u(-saddle.theta_dag[0], -saddle.theta_dag[1], 0.0, 1.0);
  const Eigen::Vector4d v(-saddle.gamma_dag[0], 0.0, -saddle.gamma_dag[1], 1.0);
  // grad_theta log g = (u'w) (x1, x2); grad_gamma log h = (v'w) (x1, z1).
  const Eigen::Vector4d Su = S * u, Sv = S * v;
  const std::vector<double> ts{Su[0], Su[1]}, gs{Sv[0], Sv[2]};
  const std::vector<double> th{saddle.theta_dag[0], saddle.theta_dag[1]};
  const std::vector<double> ga{saddle.gamma_dag[0], saddle.gamma_dag[1]};
  return classify_scores(ts, gs, th, saddle.theta_box, ga, saddle.gamma_box, tolerance);
}

}  // namespace gci
