#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gci/error.hpp"
#include "gci/glm.hpp"
#include "gci/optimize.hpp"
#include "gci/rng.hpp"
#include "oracles.hpp"

using namespace gci;

namespace {

GlmDesign random_design(std::uint64_t seed, Eigen::Index n, Eigen::Index p, Eigen::Index q, Cumulant c,
                        double scale = 1.0) {
  CounterRng rng(seed, 0);
  GlmDesign d;
  d.X.resize(n, p);
  d.Z.resize(n, q);
  d.beta0.resize(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.X(i, j) = rng.normal();
    for (Eigen::Index j = 0; j < q; ++j) d.Z(i, j) = rng.normal();
  }
  for (Eigen::Index j = 0; j < p; ++j) d.beta0[j] = scale * rng.normal();
  d.cumulant = c;
  return d;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// log E exp{lambda (log h_i - log g_i)} for one row, by summation or quadrature
// over the response.
double row_log_mgf(Cumulant c, double eta0, double xb, double zg, double lambda) {
  auto logratio = [&](double y) {
    return (zg - xb) * y - (cumulant_b(c, zg) - cumulant_b(c, xb));
  };
  switch (c) {
    case Cumulant::gaussian: {
      const double m = oracle::integrate([&](double y) {
        return std::exp(oracle::normal_logpdf(eta0, y) + lambda * logratio(y));
      });
      return std::log(m);
    }
    case Cumulant::poisson: {
      const double m = oracle::sum_terms([&](double k) {
        return std::exp(oracle::poisson_logpmf(std::exp(eta0), k) + lambda * logratio(k));
      });
      return std::log(m);
    }
    case Cumulant::bernoulli: {
      const double p = 1.0 / (1.0 + std::exp(-eta0));
      return std::log((1 - p) * std::exp(lambda * logratio(0.0)) + p * std::exp(lambda * logratio(1.0)));
    }
  }
  return 0.0;
}

}  // namespace

TEST_CASE("rho_tilde trivial identities") {
  for (auto c : {Cumulant::gaussian, Cumulant::poisson, Cumulant::bernoulli}) {
    const auto d = random_design(3, 30, 2, 2, c, 0.5);
    const Eigen::VectorXd b = vec({0.3, -0.2}), g = vec({0.1, 0.4});
    CHECK(rho_tilde(d, b, g, 0.0) == 0.0);

    // gamma'Z = beta'X row by row when Z = X and gamma = beta.
    GlmDesign same = d;
    same.Z = same.X;
    for (double l : {-0.5, 0.3, 1.7}) {
      CHECK(std::abs(rho_tilde(same, b, b, l)) < 1e-14);
      CHECK(std::abs(rho_tilde_dlambda(same, b, b, l)) < 1e-14);
    }
    // First-order underestimation by a convex cumulant.
    CHECK(rho_tilde_dlambda(d, d.beta0, g, 0.0) >= 0.0);
  }
}

TEST_CASE("single Gaussian row closed form") {
  GlmDesign d;
  d.X = Eigen::MatrixXd::Ones(1, 1);
  d.Z = Eigen::MatrixXd::Ones(1, 1);
  d.beta0 = vec({0.0});
  for (double c : {0.5, 1.0, 3.0}) {
    for (double l : {-1.0, 0.2, 0.5, 1.3})
      CHECK(rho_tilde(d, vec({0.0}), vec({c}), l) == doctest::Approx(l * c * c / 2 - l * l * c * c / 2).epsilon(1e-14));
    const auto s = rho_tilde_sup_lambda(d, vec({0.0}), vec({c}));
    CHECK(s.lambda == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(s.value == doctest::Approx(c * c / 8).epsilon(1e-12));
    CHECK(std::abs(rho_tilde_dlambda(d, vec({0.0}), vec({c}), 0.5)) < 1e-14);
  }
  // Far from beta0 the quadratic in gamma dips below zero.
  CHECK(in_Bn(d, vec({0.0})));
  CHECK_FALSE(in_Bn(d, vec({3.0})));
}

TEST_CASE("lambda derivative and concavity") {
  for (auto c : {Cumulant::gaussian, Cumulant::poisson, Cumulant::bernoulli}) {
    const auto d = random_design(5, 25, 2, 3, c, 0.4);
    CounterRng rng(6, 0);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd b = vec({0.5 * rng.normal(), 0.5 * rng.normal()});
      const Eigen::VectorXd g = vec({0.5 * rng.normal(), 0.5 * rng.normal(), 0.5 * rng.normal()});
      const double l = 2 * rng.uniform() - 0.5, h = 1e-5;
      const double fd = (rho_tilde(d, b, g, l + h) - rho_tilde(d, b, g, l - h)) / (2 * h);
      CHECK(std::abs(rho_tilde_dlambda(d, b, g, l) - fd) < 1e-7);
      const double second = rho_tilde(d, b, g, l + 0.1) - 2 * rho_tilde(d, b, g, l) + rho_tilde(d, b, g, l - 0.1);
      CHECK(second <= 1e-10);
      CHECK(rho_tilde_d2lambda(d, b, g, l) < 0.0);
    }
  }
}

TEST_CASE("rho_tilde equals the per-row moment generating function") {
  CounterRng rng(15, 0);
  for (int k = 0; k < 20; ++k) {
    const auto c = static_cast<Cumulant>(k % 3);
    const auto d = random_design(100 + k, 6, 2, 2, c, 0.5);
    const Eigen::VectorXd b = vec({0.4 * rng.normal(), 0.4 * rng.normal()});
    const Eigen::VectorXd g = vec({0.4 * rng.normal(), 0.4 * rng.normal()});
    const double l = 1.5 * rng.uniform() - 0.25;
    const Eigen::VectorXd eta0 = d.eta0(), xb = d.X * b, zg = d.Z * g;
    double log_m = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) log_m += row_log_mgf(c, eta0[i], xb[i], zg[i], l);
    const double n = static_cast<double>(d.n());
    CHECK(std::exp(-n * rho_tilde(d, b, g, l)) == doctest::Approx(std::exp(log_m)).epsilon(1e-6));
  }
}

TEST_CASE("beta0 always belongs to B_n") {
  for (int k = 0; k < 100; ++k) {
    const auto c = static_cast<Cumulant>(k % 3);
    const auto d = random_design(1000 + k, 15 + k % 20, 1 + k % 3, 1 + (k / 3) % 3, c, 0.6);
    INFO("design " << k);
    CHECK(in_Bn(d, d.beta0));
  }
}

TEST_CASE("nesting alternative gives rate zero") {
  auto d = random_design(8, 40, 2, 2, Cumulant::poisson, 0.3);
  d.Z = d.X;
  const auto r = glm_rate(d);
  CHECK(r.rho == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
}

TEST_CASE("fixed-design Gaussian rate against a direction scan") {
  // p = q = 1. With eps = (beta - beta0) X and u = gamma Z - eta0 the inner
  // value is (|u|^2 - |eps|^2)^2 / (8 n |u - eps|^2), and B_n is
  // |eps| <= dist(eta0, span Z).
  const auto d = random_design(21, 20, 1, 1, Cumulant::gaussian, 1.0);
  const Eigen::VectorXd x = d.X.col(0), z = d.Z.col(0), eta0 = d.eta0();
  const double n = static_cast<double>(d.n());
  const double dist = (eta0 - z * (z.dot(eta0) / z.squaredNorm())).norm();
  auto inner = [&](double beta) {
    const Eigen::VectorXd eps = (beta - d.beta0[0]) * x;
    auto f = [&](double g) {
      const Eigen::VectorXd u = g * z - eta0;
      const double a = u.squaredNorm() - eps.squaredNorm();
      return a * a / (8 * n * (u - eps).squaredNorm());
    };
    const double g0 = z.dot(eta0) / z.squaredNorm();
    double best = 1e300, arg = g0;
    for (int k = -400; k <= 400; ++k) {
      const double g = g0 + 0.02 * k;
      if (f(g) < best) best = f(g), arg = g;
    }
    return opt::brent_minimize(f, arg - 0.02, arg + 0.02, 1e-12).fx;
  };
  const double half = dist / x.norm();
  double best = -1.0, arg = d.beta0[0];
  for (int k = -1000; k <= 1000; ++k) {
    const double b = d.beta0[0] + half * k / 1000.0;
    const double v = inner(b);
    if (v > best) best = v, arg = b;
  }
  const auto ref = opt::brent_minimize([&](double b) { return -inner(b); }, std::max(arg - half / 1000, d.beta0[0] - half),
                                       std::min(arg + half / 1000, d.beta0[0] + half), 1e-12);
  best = std::max(best, -ref.fx);

  const auto r = glm_rate(d);
  CHECK(r.rho == doctest::Approx(best).epsilon(1e-5));
  CHECK(r.rho >= r.rho_at_beta0 - 1e-12);
  CHECK(in_Bn(d, r.beta_dag));
  CHECK(std::abs(r.rho_at_beta0 - inner(d.beta0[0])) < 1e-8);
}

TEST_CASE("Gaussian joint model: closed-form MGF") {
  Eigen::Matrix3d sigma;
  sigma << 1.0, 0.1, 0.1, 0.1, 1.0, 0.1, 0.1, 0.1, 1.0;
  GaussianJointModel m{sigma, Eigen::Vector2d(1.0, 2.0), 0.0};

  // Covariance of (X1, X2, Z1, Y) and the quadratic form, built here from scratch.
  Eigen::Matrix4d C = Eigen::Matrix4d::Zero();
  C.topLeftCorner<3, 3>() = sigma;
  const Eigen::Vector3d cov_y = sigma.leftCols<2>() * m.beta0;
  C.block<3, 1>(0, 3) = cov_y;
  C.block<1, 3>(3, 0) = cov_y.transpose();
  C(3, 3) = m.beta0.dot(sigma.topLeftCorner<2, 2>() * m.beta0) + 1.0;

  CounterRng rng(31, 0);
  for (int k = 0; k < 10; ++k) {
    const Eigen::Vector2d th(1 + 0.5 * rng.normal(), 2 + 0.5 * rng.normal());
    const Eigen::Vector2d ga(1 + 0.5 * rng.normal(), 0.5 * rng.normal());
    const Eigen::Vector4d a(-th[0], -th[1], 0.0, 1.0), c(-ga[0], 0.0, -ga[1], 1.0);
    const Eigen::Matrix4d A = 0.5 * (a * a.transpose() - c * c.transpose());
    const double l = 0.4 * rng.uniform();
    const double ref = -0.5 * std::log((Eigen::Matrix4d::Identity() - 2 * l * A * C).determinant());
    CHECK(m.log_mgf(th, ga, l).value == doctest::Approx(ref).epsilon(1e-10));
  }
  // Far along lambda the tilted precision stops being positive definite.
  CHECK_THROWS_AS(m.log_mgf(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0), 50.0), DivergenceError);
}

TEST_CASE("Gaussian joint rate: Example 3 value, nesting and monotonicity") {
  Eigen::Matrix3d sigma;
  sigma << 1.0, 0.1, 0.1, 0.1, 1.0, 0.1, 0.1, 0.1, 1.0;
  CHECK(gaussian_joint_rate(sigma, Eigen::Vector2d(1.0, 2.0)) == doctest::Approx(0.45).epsilon(0.02 / 0.45));
  CHECK(gaussian_joint_rate(sigma, Eigen::Vector2d(0.0, 0.0)) < 1e-6);

  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  double prev = 0.0;
  for (double c : {0.5, 1.0, 2.0}) {
    const double r = gaussian_joint_rate(I, Eigen::Vector2d(0.0, c));
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("fixed covariate draws give a larger exponent than random covariates") {
  Eigen::Matrix3d sigma;
  sigma << 1.0, 0.1, 0.1, 0.1, 1.0, 0.1, 0.1, 0.1, 1.0;
  const Eigen::Matrix3d L = sigma.llt().matrixL();
  CounterRng rng(3, 0);
  GlmDesign d;
  const int n = 80;
  d.X.resize(n, 2);
  d.Z.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d w = L * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    d.X.row(i) << w[0], w[1];
    d.Z.row(i) << w[0], w[2];
  }
  d.beta0 = vec({1.0, 2.0});
  const auto r = glm_rate(d);
  CHECK(r.rho > gaussian_joint_rate(sigma, Eigen::Vector2d(1.0, 2.0)) + 0.1);
  CHECK(r.rho >= r.rho_at_beta0 - 1e-12);
}

TEST_CASE("GLM tilt sampler") {
  const auto d = random_design(41, 30, 2, 2, Cumulant::poisson, 0.3);
  const Eigen::VectorXd b = vec({0.2, -0.1}), g = vec({0.3, 0.2});
  const auto plain = glm_tilted_sampler(d, b, g, 0.0, 3, 9);
  for (std::size_t r = 0; r < 3; ++r) {
    CounterRng rng(9, r);
    CHECK(plain[r] == draw_glm_response(d.cumulant, d.eta0(), rng));
  }

  // Centered statistic has mean zero at the maximising lambda.
  const auto s = rho_tilde_sup_lambda(d, b, g);
  const auto ys = glm_tilted_sampler(d, b, g, s.lambda, 100000, 10);
  const Eigen::VectorXd diff = d.Z * g - d.X * b;
  double shift = 0.0;
  const Eigen::VectorXd xb = d.X * b, zg = d.Z * g;
  for (Eigen::Index i = 0; i < d.n(); ++i) shift += cumulant_b(d.cumulant, zg[i]) - cumulant_b(d.cumulant, xb[i]);
  std::vector<double> stat;
  for (const auto& y : ys) stat.push_back(diff.dot(y) - shift);
  double m = 0.0, v = 0.0;
  for (double t : stat) m += t;
  m /= stat.size();
  for (double t : stat) v += (t - m) * (t - m);
  v /= stat.size() - 1;
  CHECK(std::abs(m) < 4 * std::sqrt(v / stat.size()));

  // Gaussian conjugate tilt: mean equals the tilted natural parameter.
  const auto dg = random_design(42, 4, 1, 1, Cumulant::gaussian);
  const auto yg = glm_tilted_sampler(dg, vec({0.5}), vec({-0.5}), 0.7, 40000, 11);
  const Eigen::VectorXd eta = dg.eta0() + 0.7 * (dg.Z * vec({-0.5}) - dg.X * vec({0.5}));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (const auto& y : yg) mean += y;
  mean /= yg.size();
  CHECK((mean - eta).cwiseAbs().maxCoeff() < 4.5 / std::sqrt(40000.0));
}

TEST_CASE("GLM maximum likelihood solves the score equation") {
  for (auto c : {Cumulant::gaussian, Cumulant::poisson, Cumulant::bernoulli}) {
    const auto d = random_design(50, 300, 3, 1, c, 0.4);
    CounterRng rng(51, 0);
    const Eigen::VectorXd y = draw_glm_response(c, d.eta0(), rng);
    const Eigen::VectorXd bh = glm_mle(c, d.X, y);
    const Eigen::VectorXd eta = d.X * bh;
    Eigen::VectorXd r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = y[i] - cumulant_b1(c, eta[i]);
    CHECK((d.X.transpose() * r).norm() < 1e-8);
  }
}

TEST_CASE("design files") {
  const auto dir = std::filesystem::temp_directory_path() / "gci_test_glm";
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "d.csv");
    csv << "x1,x2,y,z1\n1,0.5,9,2\n1,-1,9,0.25\n1,2,9,-3\n";
    std::ofstream js(dir / "d.json");
    js << R"({"beta0": [0.1, 0.2], "cumulant": "poisson"})";
  }
  const auto d = load_design((dir / "d.csv").string(), (dir / "d.json").string());
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  CHECK(d.q() == 1);
  CHECK(d.X(2, 1) == 2.0);
  CHECK(d.Z(1, 0) == 0.25);
  CHECK(d.cumulant == Cumulant::poisson);
  CHECK(d.beta0[1] == 0.2);
  CHECK_THROWS_AS(load_design((dir / "missing.csv").string(), (dir / "d.json").string()), ConfigError);

  const auto chk = check_design(d);
  CHECK(chk.min_eigen_x > 0.0);
  std::filesystem::remove_all(dir);
}
