#include "gci/glm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "gci/error.hpp"
#include "gci/optimize.hpp"
#include "gci/parallel.hpp"
#include "gci/rng.hpp"

namespace gci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double logistic(double u) {
  return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}
}  // namespace

Cumulant parse_cumulant(std::string_view name) {
  if (name == "gaussian") return Cumulant::gaussian;
  if (name == "poisson") return Cumulant::poisson;
  if (name == "bernoulli") return Cumulant::bernoulli;
  throw ParameterError("unknown cumulant '" + std::string(name) + "'");
}

std::string to_string(Cumulant c) {
  switch (c) {
    case Cumulant::gaussian: return "gaussian";
    case Cumulant::poisson: return "poisson";
    case Cumulant::bernoulli: return "bernoulli";
  }
  return "?";
}

double cumulant_b(Cumulant c, double u) {
  switch (c) {
    case Cumulant::gaussian: return 0.5 * u * u;
    case Cumulant::poisson: return std::exp(u);
    case Cumulant::bernoulli: return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  }
  return 0.0;
}

double cumulant_b1(Cumulant c, double u) {
  switch (c) {
    case Cumulant::gaussian: return u;
    case Cumulant::poisson: return std::exp(u);
    case Cumulant::bernoulli: return logistic(u);
  }
  return 0.0;
}

double cumulant_b2(Cumulant c, double u) {
  switch (c) {
    case Cumulant::gaussian: return 1.0;
    case Cumulant::poisson: return std::exp(u);
    case Cumulant::bernoulli: {
      const double p = logistic(u);
      return p * (1.0 - p);
    }
  }
  return 0.0;
}

DesignCheck check_design(const GlmDesign& d, double row_norm_bound) {
  DesignCheck out;
  if (d.X.rows() == 0 || d.Z.rows() != d.X.rows()) {
    throw ParameterError("GlmDesign: X and Z need the same positive number of rows");
  }
  if (d.beta0.size() != d.X.cols()) throw ParameterError("GlmDesign: beta0 length differs from X columns");
  out.max_row_norm_x = d.X.rowwise().norm().maxCoeff();
  out.max_row_norm_z = d.Z.rowwise().norm().maxCoeff();
  const double n = static_cast<double>(d.n());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(d.X.transpose() * d.X / n, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ez(d.Z.transpose() * d.Z / n, Eigen::EigenvaluesOnly);
  out.min_eigen_x = ex.eigenvalues().minCoeff();
  out.min_eigen_z = ez.eigenvalues().minCoeff();
  out.ok = true;
  if (!(out.max_row_norm_x <= row_norm_bound && out.max_row_norm_z <= row_norm_bound)) {
    out.ok = false;
    out.messages.push_back("row norm exceeds the configured bound");
  }
  if (!(out.min_eigen_x > 1e-12)) {
    out.ok = false;
    out.messages.push_back("(1/n) X'X is singular");
  }
  if (!(out.min_eigen_z > 1e-12)) out.messages.push_back("(1/n) Z'Z is singular");
  return out;
}

namespace {

void check_dims(const GlmDesign& d, const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  if (beta.size() != d.p() || gamma.size() != d.q() || d.Z.rows() != d.X.rows() ||
      d.beta0.size() != d.p()) {
    throw ParameterError("rho_tilde: dimension mismatch");
  }
}

struct Rows {
  Eigen::VectorXd eta0, xb, zg;
};

Rows rows(const GlmDesign& d, const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  check_dims(d, beta, gamma);
  return {d.X * d.beta0, d.X * beta, d.Z * gamma};
}

double mean_of(std::vector<double>& terms) {
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

}  // namespace

double rho_tilde(const GlmDesign& d, const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma,
                 double lambda) {
  const Rows r = rows(d, beta, gamma);
  if (lambda == 0.0) return 0.0;
  std::vector<double> t(static_cast<std::size_t>(d.n()));
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double diff = r.zg[i] - r.xb[i];
    t[static_cast<std::size_t>(i)] =
        lambda * (cumulant_b(d.cumulant, r.zg[i]) - cumulant_b(d.cumulant, r.xb[i])) +
        cumulant_b(d.cumulant, r.eta0[i]) - cumulant_b(d.cumulant, r.eta0[i] + lambda * diff);
  }
  return mean_of(t);
}

double rho_tilde_dlambda(const GlmDesign& d, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& gamma, double lambda) {
  const Rows r = rows(d, beta, gamma);
  std::vector<double> t(static_cast<std::size_t>(d.n()));
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double diff = r.zg[i] - r.xb[i];
    t[static_cast<std::size_t>(i)] = cumulant_b(d.cumulant, r.zg[i]) - cumulant_b(d.cumulant, r.xb[i]) -
                                     cumulant_b1(d.cumulant, r.eta0[i] + lambda * diff) * diff;
  }
  return mean_of(t);
}

double rho_tilde_d2lambda(const GlmDesign& d, const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& gamma, double lambda) {
  const Rows r = rows(d, beta, gamma);
  std::vector<double> t(static_cast<std::size_t>(d.n()));
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double diff = r.zg[i] - r.xb[i];
    t[static_cast<std::size_t>(i)] = -cumulant_b2(d.cumulant, r.eta0[i] + lambda * diff) * diff * diff;
  }
  return mean_of(t);
}

SupLambda rho_tilde_sup_lambda(const GlmDesign& d, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& gamma) {
  const double f0 = rho_tilde_dlambda(d, beta, gamma, 0.0);
  if (f0 == 0.0 || rho_tilde_d2lambda(d, beta, gamma, 0.0) == 0.0) return {0.0, 0.0};
  const double dir = f0 > 0 ? 1.0 : -1.0;
  double prev = 0.0, z = dir;
  bool found = false;
  for (int k = 0; k < 80; ++k) {
    const double f = rho_tilde_dlambda(d, beta, gamma, z);
    if (!(f * dir > 0.0)) {
      found = true;
      break;
    }
    prev = z;
    z *= 2.0;
  }
  if (!found) {
    // Drift never turns: the supremum is approached as |lambda| grows.
    return {prev, rho_tilde(d, beta, gamma, prev)};
  }
  const double a = std::min(prev, z), b = std::max(prev, z);
  auto fd = [&](double l) {
    return std::pair<double, double>{-rho_tilde_dlambda(d, beta, gamma, l),
                                     -rho_tilde_d2lambda(d, beta, gamma, l)};
  };
  const auto root = opt::newton_bracketed(fd, a, b, 1e-13, 200);
  return {root.x, rho_tilde(d, beta, gamma, root.x)};
}

BnMembership in_Bn_report(const GlmDesign& d, const Eigen::VectorXd& beta) {
  if (beta.size() != d.p()) throw ParameterError("in_Bn: beta has the wrong length");
  const double n = static_cast<double>(d.n());
  const Eigen::VectorXd eta0 = d.eta0();
  const Eigen::VectorXd xb = d.X * beta;
  Eigen::VectorXd mu0(d.n());
  double cst = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    mu0[i] = cumulant_b1(d.cumulant, eta0[i]);
    cst += -cumulant_b(d.cumulant, xb[i]) + mu0[i] * xb[i];
  }
  cst /= n;
  auto F = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd zg = d.Z * g;
    std::vector<double> t(static_cast<std::size_t>(d.n()));
    for (Eigen::Index i = 0; i < d.n(); ++i)
      t[static_cast<std::size_t>(i)] = cumulant_b(d.cumulant, zg[i]) - mu0[i] * zg[i];
    return pairwise_sum(t) / n + cst;
  };
  BnMembership out;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d.q());
  double fg = F(g);
  int it = 0;
  for (; it < 200; ++it) {
    const Eigen::VectorXd zg = d.Z * g;
    Eigen::VectorXd w(d.n()), r(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      w[i] = cumulant_b2(d.cumulant, zg[i]);
      r[i] = cumulant_b1(d.cumulant, zg[i]) - mu0[i];
    }
    const Eigen::VectorXd grad = d.Z.transpose() * r / n;
    Eigen::MatrixXd H = d.Z.transpose() * w.asDiagonal() * d.Z / n;
    H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().array().abs());
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    if (grad.norm() < 1e-13 * (1.0 + std::abs(fg))) break;
    double t = 1.0;
    Eigen::VectorXd cand = g - step;
    double fc = F(cand);
    while (!(fc <= fg) && t > 1e-12) {
      t *= 0.5;
      cand = g - t * step;
      fc = F(cand);
    }
    if (!(fc <= fg)) break;
    const bool tiny = (cand - g).norm() <= 1e-14 * (1.0 + g.norm());
    g = cand;
    fg = fc;
    if (g.norm() > 1e8) {
      out.unbounded = true;
      out.diagnostic = "inner minimisation over gamma diverges";
      break;
    }
    if (tiny) break;
  }
  out.inf_value = fg;
  out.gamma_argmin = g;
  out.member = !out.unbounded && fg >= -1e-9;
  if (out.diagnostic.empty()) {
    out.diagnostic = out.member ? "ok" : "inf_gamma d/dlambda rho_tilde(beta, gamma, 0) < 0";
  }
  return out;
}

bool in_Bn(const GlmDesign& d, const Eigen::VectorXd& beta) { return in_Bn_report(d, beta).member; }

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

MiddleGlm glm_inf_gamma(const GlmDesign& d, const Eigen::VectorXd& beta, const GlmRateConfig& config) {
  auto V = [&](std::span<const double> g) {
    const auto s = rho_tilde_sup_lambda(d, beta, to_eigen(g));
    return std::isfinite(s.value) ? s.value : kInf;
  };
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(in_Bn_report(d, beta).gamma_argmin);
  // Least-squares match of the alternative linear predictor to beta' X.
  starts.push_back(d.Z.colPivHouseholderQr().solve(d.X * beta));
  starts.push_back(Eigen::VectorXd::Zero(d.q()));
  CounterRng rng(config.seed, 0x61d);
  const Eigen::VectorXd anchor = starts[1];
  for (std::size_t k = 0; k < config.gamma_starts; ++k) {
    Eigen::VectorXd s = anchor;
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += 0.5 * rng.normal() * (1.0 + std::abs(s[i]));
    starts.push_back(s);
  }
  opt::SimplexOptions so;
  so.xtol = config.xtol;
  so.ftol = 1e-15;
  so.max_evaluations = 3000;
  MiddleGlm best;
  best.value = kInf;
  for (const auto& s0 : starts) {
    so.step.assign(static_cast<std::size_t>(s0.size()), 0.0);
    for (Eigen::Index i = 0; i < s0.size(); ++i)
      so.step[static_cast<std::size_t>(i)] = 0.1 * std::max(1.0, std::abs(s0[i]));
    const auto res = opt::nelder_mead(V, to_std(s0), so);
    if (res.fx < best.value) {
      best.value = res.fx;
      best.gamma = to_eigen(res.x);
    }
  }
  best.lambda = rho_tilde_sup_lambda(d, beta, best.gamma).lambda;
  return best;
}

GlmRate glm_rate(const GlmDesign& d, const GlmRateConfig& config) {
  const auto chk = check_design(d);
  if (!chk.ok) {
    std::string msg = "glm_rate: design check failed:";
    for (const auto& m : chk.messages) msg += " " + m + ";";
    throw ParameterError(msg);
  }
  GlmRate out;
  const MiddleGlm at0 = glm_inf_gamma(d, d.beta0, config);
  out.rho_at_beta0 = at0.value;
  auto objective = [&](std::span<const double> b) {
    const Eigen::VectorXd beta = to_eigen(b);
    if (!in_Bn(d, beta)) return kInf;
    return -glm_inf_gamma(d, beta, config).value;
  };
  std::vector<Eigen::VectorXd> starts{d.beta0};
  CounterRng rng(config.seed, 0xb7);
  for (std::size_t k = 0; k < config.beta_starts; ++k) {
    Eigen::VectorXd s = d.beta0;
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += 0.25 * rng.normal() * (1.0 + std::abs(s[i]));
    if (in_Bn(d, s)) starts.push_back(s);
  }
  opt::SimplexOptions so;
  so.xtol = config.xtol;
  so.ftol = 1e-15;
  so.max_evaluations = 2000;
  Eigen::VectorXd best_beta = d.beta0;
  double best = at0.value;
  bool converged = false;
  for (const auto& s0 : starts) {
    so.step.assign(static_cast<std::size_t>(s0.size()), 0.0);
    for (Eigen::Index i = 0; i < s0.size(); ++i)
      so.step[static_cast<std::size_t>(i)] = 0.1 * std::max(1.0, std::abs(s0[i]));
    const auto res = opt::nelder_mead(objective, to_std(s0), so);
    converged = converged || res.converged;
    if (-res.fx > best) {
      best = -res.fx;
      best_beta = to_eigen(res.x);
    }
  }
  if (!converged) {
    throw OptimizationError("glm_rate: outer beta search did not converge", to_std(best_beta), best);
  }
  const MiddleGlm mid = glm_inf_gamma(d, best_beta, config);
  out.rho = std::max(mid.value, out.rho_at_beta0);
  out.beta_dag = best_beta;
  out.gamma_dag = mid.gamma;
  out.lambda_dag = mid.lambda;
  if (mid.value < out.rho_at_beta0) {
    out.beta_dag = d.beta0;
    out.gamma_dag = at0.gamma;
    out.lambda_dag = at0.lambda;
  }
  if (chk.min_eigen_z <= 1e-12) out.warnings.push_back("(1/n) Z'Z is singular");
  return out;
}

Eigen::VectorXd draw_glm_response(Cumulant c, const Eigen::VectorXd& eta, CounterRng& rng) {
  static const FamilyPtr poisson = make_poisson();
  Eigen::VectorXd y(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    switch (c) {
      case Cumulant::gaussian:
        y[i] = eta[i] + rng.normal();
        break;
      case Cumulant::poisson: {
        const double mu = std::exp(eta[i]);
        const double p[1] = {mu};
        y[i] = poisson->draw(p, rng);
        break;
      }
      case Cumulant::bernoulli:
        y[i] = rng.uniform() < logistic(eta[i]) ? 1.0 : 0.0;
        break;
    }
  }
  return y;
}

std::vector<Eigen::VectorXd> glm_tilted_sampler(const GlmDesign& d, const Eigen::VectorXd& beta,
                                                const Eigen::VectorXd& gamma, double lambda,
                                                std::size_t count, std::uint64_t seed) {
  check_dims(d, beta, gamma);
  const Eigen::VectorXd eta = d.eta0() + lambda * (d.Z * gamma - d.X * beta);
  std::vector<Eigen::VectorXd> out(count);
  for (std::size_t r = 0; r < count; ++r) {
    CounterRng rng(seed, r);
    out[r] = draw_glm_response(d.cumulant, eta, rng);
  }
  return out;
}

double glm_log_likelihood(Cumulant c, const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  std::vector<double> t(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    t[static_cast<std::size_t>(i)] = y[i] * eta[i] - cumulant_b(c, eta[i]);
  return pairwise_sum(t);
}

Eigen::VectorXd glm_mle(Cumulant c, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_iter) {
  if (c == Cumulant::gaussian) return X.colPivHouseholderQr().solve(y);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  double ll = glm_log_likelihood(c, X * beta, y);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd w(eta.size()), r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      w[i] = cumulant_b2(c, eta[i]);
      r[i] = y[i] - cumulant_b1(c, eta[i]);
    }
    const Eigen::VectorXd grad = X.transpose() * r;
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd cand = beta + step;
    double lc = glm_log_likelihood(c, X * cand, y);
    while (!(lc >= ll) && t > 1e-10) {
      t *= 0.5;
      cand = beta + t * step;
      lc = glm_log_likelihood(c, X * cand, y);
    }
    if (!(lc >= ll)) break;
    const bool done = (cand - beta).norm() <= 1e-12 * (1.0 + beta.norm());
    beta = cand;
    ll = lc;
    if (done) break;
  }
  return beta;
}

GlmDesign load_design(const std::string& csv_path, const std::string& json_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open design CSV '" + csv_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("design CSV '" + csv_path + "' is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      out.push_back(cell);
    }
    return out;
  };
  const auto header = split(line);
  std::vector<std::size_t> xc, zc;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].empty()) continue;
    const char tag = static_cast<char>(std::tolower(static_cast<unsigned char>(header[j][0])));
    if (tag == 'x') xc.push_back(j);
    if (tag == 'z') zc.push_back(j);
  }
  if (xc.empty() || zc.empty()) throw ConfigError("design CSV needs x* and z* columns");
  std::vector<std::vector<double>> data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ConfigError("design CSV line " + std::to_string(lineno) + " has the wrong number of fields");
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        std::size_t pos = 0;
        row[j] = std::stod(cells[j], &pos);
        if (pos != cells[j].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError("design CSV line " + std::to_string(lineno) + ": bad number '" + cells[j] + "'");
      }
    }
    data.push_back(std::move(row));
  }
  if (data.empty()) throw ConfigError("design CSV has no rows");
  GlmDesign d;
  const auto n = static_cast<Eigen::Index>(data.size());
  d.X.resize(n, static_cast<Eigen::Index>(xc.size()));
  d.Z.resize(n, static_cast<Eigen::Index>(zc.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < xc.size(); ++j) d.X(i, static_cast<Eigen::Index>(j)) = data[static_cast<std::size_t>(i)][xc[j]];
    for (std::size_t j = 0; j < zc.size(); ++j) d.Z(i, static_cast<Eigen::Index>(j)) = data[static_cast<std::size_t>(i)][zc[j]];
  }
  std::ifstream js(json_path);
  if (!js) throw ConfigError("cannot open design sidecar '" + json_path + "'");
  nlohmann::json j;
  try {
    js >> j;
  } catch (const std::exception& e) {
    throw ConfigError("design sidecar is not valid JSON: " + std::string(e.what()));
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "beta0" && it.key() != "cumulant") throw ConfigError("design sidecar: unknown key '" + it.key() + "'");
  }
  if (!j.contains("beta0") || !j["beta0"].is_array()) throw ConfigError("design sidecar: beta0 array required");
  const auto b0 = j["beta0"].get<std::vector<double>>();
  if (b0.size() != xc.size()) throw ConfigError("design sidecar: beta0 length differs from the x columns");
  d.beta0 = Eigen::Map<const Eigen::VectorXd>(b0.data(), static_cast<Eigen::Index>(b0.size()));
  try {
    d.cumulant = parse_cumulant(j.value("cumulant", std::string("gaussian")));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return d;
}

}  // namespace gci
