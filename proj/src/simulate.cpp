#include "gci/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gci/error.hpp"
#include "gci/parallel.hpp"
#include "gci/quadrature.hpp"

namespace gci {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_string(Method m) { return m == Method::direct ? "direct" : "tilted"; }
std::string to_string(Side s) { return s == Side::type_I ? "type-I" : "type-II"; }

double glrt_statistic(std::span<const double> data, const FamilyModel& g, const ParamBox& theta_box,
                      const FamilyModel& h, const ParamBox& gamma_box) {
  if (data.empty()) throw DomainError("glrt_statistic: empty data");
  const auto th = g.mle(data, theta_box);
  const auto ga = h.mle(data, gamma_box);
  return h.log_likelihood(ga, data) - g.log_likelihood(th, data);
}

IidScenario::IidScenario(FamilyPtr g, ParamBox theta_box, FamilyPtr h, ParamBox gamma_box,
                         FamilyPtr truth, std::vector<double> truth_params, Side side, double b,
                         std::optional<TiltedMeasure> tilt)
    : g_(std::move(g)),
      h_(std::move(h)),
      truth_(std::move(truth)),
      theta_box_(std::move(theta_box)),
      gamma_box_(std::move(gamma_box)),
      truth_params_(std::move(truth_params)),
      side_(side),
      b_(b),
      tilt_(std::move(tilt)) {
  truth_->check_params(truth_params_);
  if (!g_->support().same_as(h_->support()) || !truth_->support().same_as(g_->support())) {
    throw DomainError("IidScenario: families do not share a support");
  }
  if (tilt_) {
    bool same = tilt_->gfam->id() == truth_->id() && tilt_->theta0.size() == truth_params_.size();
    for (std::size_t i = 0; same && i < truth_params_.size(); ++i)
      same = std::abs(tilt_->theta0[i] - truth_params_[i]) <= 1e-12 * (1.0 + std::abs(truth_params_[i]));
    if (!same) throw ParameterError("IidScenario: the tilt's base law is not the truth");
    sampler_ = std::make_shared<const TiltedSampler>(*tilt_);
  }
}

Replicate IidScenario::run(std::size_t n, bool tilted, CounterRng& rng) const {
  std::vector<double> x(n);
  Replicate r;
  if (tilted) {
    if (!sampler_) throw ParameterError("IidScenario: no tilt configured");
    double sum_l = 0.0;
    for (auto& xi : x) {
      xi = sampler_->draw(rng);
      sum_l += sampler_->centered_log_ratio(xi);
    }
    // lambda = 0 samples the base law itself; the quadrature normalizer is off by ~1e-15.
    r.log_weight = tilt_->lambda_dag == 0.0
                       ? 0.0
                       : static_cast<double>(n) * sampler_->log_normalizer() - tilt_->lambda_dag * sum_l;
  } else {
    for (auto& xi : x) xi = truth_->draw(truth_params_, rng);
  }
  const double stat = glrt_statistic(x, *g_, theta_box_, *h_, gamma_box_);
  const double thr = static_cast<double>(n) * b_;
  r.event = side_ == Side::type_I ? stat > thr : stat <= thr;
  return r;
}

GaussianJointScenario::GaussianJointScenario(GaussianJointModel model,
                                             std::optional<GaussianJointSaddle> saddle)
    : model_(std::move(model)), saddle_(std::move(saddle)) {
  Eigen::LLT<Eigen::Matrix4d> lt(model_.covariance());
  if (lt.info() != Eigen::Success) throw ParameterError("joint covariance is not positive definite");
  chol_truth_ = lt.matrixL();
  if (saddle_) {
    const Eigen::Matrix4d S =
        model_.tilted_covariance(saddle_->theta_dag, saddle_->gamma_dag, saddle_->lambda_dag);
    Eigen::LLT<Eigen::Matrix4d> ls(S);
    if (ls.info() != Eigen::Success) throw NumericError("tilted covariance is not positive definite");
    chol_tilt_ = ls.matrixL();
    A_ = GaussianJointModel::quadratic_form(saddle_->theta_dag, saddle_->gamma_dag);
    const Eigen::Matrix4d second = model_.covariance().inverse() + 2.0 * saddle_->lambda_dag * A_;
    if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(second).eigenvalues().minCoeff() <= 0.0)
      alpha_ = kDefensiveShare;
  }
}

namespace {

// Residual sum of squares of y on two regressors from accumulated moments.
double rss2(const Eigen::Matrix2d& sxx, const Eigen::Vector2d& sxy, double syy) {
  const Eigen::Vector2d coef = sxx.ldlt().solve(sxy);
  return syy - sxy.dot(coef);
}

}  // namespace

Replicate GaussianJointScenario::run(std::size_t n, bool tilted, CounterRng& rng) const {
  if (tilted && !saddle_) throw ParameterError("GaussianJointScenario: no tilt configured");
  const bool from_truth = !tilted || (alpha_ > 0.0 && rng.uniform() < alpha_);
  const Eigen::Matrix4d& L = from_truth ? chol_truth_ : chol_tilt_;
  Eigen::Matrix2d s0 = Eigen::Matrix2d::Zero(), s1 = Eigen::Matrix2d::Zero();
  Eigen::Vector2d r0 = Eigen::Vector2d::Zero(), r1 = Eigen::Vector2d::Zero();
  double syy = 0.0, sum_l = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector4d e;
    for (int k = 0; k < 4; ++k) e[k] = rng.normal();
    const Eigen::Vector4d w = L * e;
    const Eigen::Vector2d x(w[0], w[1]), z(w[0], w[2]);
    s0 += x * x.transpose();
    s1 += z * z.transpose();
    r0 += x * w[3];
    r1 += z * w[3];
    syy += w[3] * w[3];
    if (tilted) sum_l += w.dot(A_ * w) - model_.offset_b;
  }
  Replicate r;
  const double rss_null = rss2(s0, r0, syy);
  const double rss_alt = rss2(s1, r1, syy);
  r.event = rss_null - rss_alt > 2.0 * static_cast<double>(n) * model_.offset_b;
  if (tilted) {
    // log dP/dQ for the whole sample
    const double lw = static_cast<double>(n) * saddle_->log_M_dag - saddle_->lambda_dag * sum_l;
    if (alpha_ == 0.0) {
      r.log_weight = lw;
    } else {
      // dP / d(alpha P + (1 - alpha) Q) = 1 / (alpha + (1 - alpha) e^-lw)
      r.log_weight = -quad::log_add(std::log(alpha_), std::log1p(-alpha_) - lw);
    }
  }
  return r;
}

GlmScenario::GlmScenario(GlmDesign design, std::optional<GlmRate> tilt)
    : design_(std::move(design)), tilt_(std::move(tilt)) {
  eta0_ = design_.eta0();
  if (tilt_) {
    diff_ = design_.Z * tilt_->gamma_dag - design_.X * tilt_->beta_dag;
    eta_tilt_ = eta0_ + tilt_->lambda_dag * diff_;
  }
}

Replicate GlmScenario::run(std::size_t n, bool tilted, CounterRng& rng) const {
  if (static_cast<Eigen::Index>(n) != design_.n()) {
    throw ParameterError("GlmScenario: sample size must equal the number of design rows");
  }
  if (tilted && !tilt_) throw ParameterError("GlmScenario: no tilt configured");
  const Cumulant c = design_.cumulant;
  const Eigen::VectorXd y = draw_glm_response(c, tilted ? eta_tilt_ : eta0_, rng);
  const double ll0 = glm_log_likelihood(c, design_.X * glm_mle(c, design_.X, y), y);
  const double ll1 = glm_log_likelihood(c, design_.Z * glm_mle(c, design_.Z, y), y);
  Replicate r;
  r.event = ll1 - ll0 >= 0.0;
  if (tilted) {
    double lw = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      lw += -tilt_->lambda_dag * diff_[i] * y[i] + cumulant_b(c, eta_tilt_[i]) - cumulant_b(c, eta0_[i]);
    }
    r.log_weight = lw;
  }
  return r;
}

namespace {

void run_range(const Scenario& s, std::size_t n, bool tilted, std::uint64_t seed, std::size_t begin,
               std::size_t end, std::vector<double>& lw, std::size_t threads) {
  lw.resize(end);
  parallel_for(end - begin, threads, [&](std::size_t k) {
    const std::size_t r = begin + k;
    CounterRng rng(seed, r);
    const Replicate rep = s.run(n, tilted, rng);
    lw[r] = rep.event ? rep.log_weight : kNegInf;
  });
}

ISEstimate summarize(const std::vector<double>& lw, Method method, const McConfig& config) {
  ISEstimate e;
  e.method = method;
  e.reps = lw.size();
  const double R = static_cast<double>(lw.size());
  double m = kNegInf;
  for (double v : lw) m = std::max(m, v);
  if (m == kNegInf) {
    e.rel_err = std::numeric_limits<double>::infinity();
    e.ess = method == Method::direct ? R : 0.0;
    return e;
  }
  std::vector<double> s(lw.size()), s2(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    s[i] = lw[i] == kNegInf ? 0.0 : std::exp(lw[i] - m);
    s2[i] = s[i] * s[i];
  }
  const double S1 = pairwise_sum(s), S2 = pairwise_sum(s2);
  const double scale = std::exp(m);
  e.p_hat = scale * S1 / R;
  if (method == Method::direct) {
    const double p = std::min(1.0, e.p_hat);
    e.p_hat = p;
    e.std_err = std::sqrt(p * (1.0 - p) / R);
    e.ess = R;
  } else {
    const double mean = S1 / R;
    const double var = R > 1 ? std::max(0.0, (S2 / R - mean * mean) * R / (R - 1.0)) : 0.0;
    e.std_err = scale * std::sqrt(var / R);
    e.ess = S1 * S1 / S2;
    if (e.ess < config.ess_floor) {
      e.low_ess = true;
      e.warnings.push_back("effective sample size below the floor");
    }
  }
  e.rel_err = e.p_hat > 0 ? e.std_err / e.p_hat : std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace

ISEstimate direct_mc(const Scenario& s, std::size_t n, std::size_t reps, std::uint64_t seed,
                     const McConfig& config) {
  if (reps == 0) throw ParameterError("direct_mc: reps must be positive");
  std::vector<double> lw;
  run_range(s, n, false, seed, 0, reps, lw, config.threads);
  return summarize(lw, Method::direct, config);
}

ISEstimate is_mc(const Scenario& s, std::size_t n, std::size_t reps, std::uint64_t seed,
                 const McConfig& config) {
  if (reps == 0) throw ParameterError("is_mc: reps must be positive");
  if (!s.has_tilt()) throw ParameterError("is_mc: scenario has no tilt");
  std::vector<double> lw;
  run_range(s, n, true, seed, 0, reps, lw, config.threads);
  return summarize(lw, Method::tilted, config);
}

ISEstimate adaptive_mc(const Scenario& s, std::size_t n, Method method, std::uint64_t seed,
                       const McConfig& config) {
  const bool tilted = method == Method::tilted;
  if (tilted && !s.has_tilt()) throw ParameterError("adaptive_mc: scenario has no tilt");
  std::vector<double> lw;
  std::size_t done = std::min(config.pilot_reps, config.max_reps);
  run_range(s, n, tilted, seed, 0, done, lw, config.threads);
  for (;;) {
    ISEstimate e = summarize(lw, method, config);
    if (e.p_hat > 0 && e.rel_err <= config.target_rel_err) return e;
    if (done >= config.max_reps) {
      e.truncated = true;
      e.warnings.push_back("replication cap reached before the target relative error");
      return e;
    }
    std::size_t next;
    if (e.p_hat > 0) {
      const double ratio = e.rel_err / config.target_rel_err;
      next = static_cast<std::size_t>(std::ceil(static_cast<double>(done) * ratio * ratio * 1.2));
      next = std::max(next, done + done / 4 + 1);
    } else {
      next = done * 10;
    }
    next = std::min(next, config.max_reps);
    run_range(s, n, tilted, seed, done, next, lw, config.threads);
    done = next;
  }
}

LineFit fit_log_linear(const std::vector<std::size_t>& n, const std::vector<ISEstimate>& est) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n.size() && i < est.size(); ++i) {
    if (est[i].p_hat > 0) {
      xs.push_back(static_cast<double>(n[i]));
      ys.push_back(std::log(est[i].p_hat));
    }
  }
  if (xs.size() < 2) throw NumericError("decay fit needs at least two positive estimates");
  const double k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / k;
    my += ys[i] / k;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw NumericError("decay fit needs two distinct sample sizes");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points_used = xs.size();
  if (xs.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - f.intercept - f.slope * xs[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / (k - 2.0) / sxx);
  }
  return f;
}

DecayCurve decay_curve(const Scenario& s, const std::vector<std::size_t>& n_list, Method method,
                       std::uint64_t seed, const McConfig& config,
                       std::optional<std::size_t> fixed_reps, Side side) {
  if (!std::is_sorted(n_list.begin(), n_list.end())) {
    throw ParameterError("decay_curve: sample sizes must be ascending");
  }
  DecayCurve c;
  c.side = side;
  c.sample_sizes = n_list;
  for (std::size_t n : n_list) {
    const std::uint64_t sn = splitmix64(seed ^ splitmix64(n));
    ISEstimate e;
    if (fixed_reps) {
      e = method == Method::direct ? direct_mc(s, n, *fixed_reps, sn, config)
                                   : is_mc(s, n, *fixed_reps, sn, config);
    } else {
      e = adaptive_mc(s, n, method, sn, config);
    }
    if (e.p_hat == 0.0) c.warnings.push_back("n = " + std::to_string(n) + ": zero estimate dropped from the fit");
    if (e.truncated) c.warnings.push_back("n = " + std::to_string(n) + ": replication cap reached");
    if (e.low_ess) c.warnings.push_back("n = " + std::to_string(n) + ": low effective sample size");
    c.estimates.push_back(std::move(e));
  }
  c.fit = fit_log_linear(n_list, c.estimates);
  return c;
}

TiltedMeasure chernoff_tilt(const FamilyPtr& g, const FamilyPtr& h, const ChernoffResult& saddle) {
  TiltedMeasure t;
  t.gfam = g;
  t.hfam = h;
  t.theta0 = saddle.theta_star;
  t.theta_dag = saddle.theta_star;
  t.gamma_dag = saddle.gamma_star;
  t.lambda_dag = saddle.z_star;
  t.log_M_dag = -saddle.rho;
  return t;
}

TiltedMeasure chernoff_tilt_swapped(const FamilyPtr& g, const FamilyPtr& h,
                                    const ChernoffResult& saddle) {
  TiltedMeasure t;
  t.gfam = h;
  t.hfam = g;
  t.theta0 = saddle.gamma_star;
  t.theta_dag = saddle.gamma_star;
  t.gamma_dag = saddle.theta_star;
  t.lambda_dag = 1.0 - saddle.z_star;
  t.log_M_dag = -saddle.rho;
  return t;
}

ErrorProbe max_error_probe(const FamilyPtr& g, const ParamBox& theta_box, const FamilyPtr& h,
                           const ParamBox& gamma_box, const ChernoffResult& saddle, std::size_t n,
                           std::size_t reps, std::uint64_t seed, const McConfig& config) {
  const IidScenario s1(g, theta_box, h, gamma_box, g, saddle.theta_star, Side::type_I, 0.0,
                       chernoff_tilt(g, h, saddle));
  const IidScenario s2(g, theta_box, h, gamma_box, h, saddle.gamma_star, Side::type_II, 0.0,
                       chernoff_tilt_swapped(g, h, saddle));
  ErrorProbe out;
  out.type_I = is_mc(s1, n, reps, seed, config);
  out.type_II = is_mc(s2, n, reps, splitmix64(seed + 1), config);
  return out;
}

}  // namespace gci
