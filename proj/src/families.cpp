#include "gci/families.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "gci/error.hpp"
#include "gci/optimize.hpp"
#include "gci/search_space.hpp"

namespace gci {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

ParamBox positive_box() {
  return ParamBox({kDefaultPositiveLower}, {kDefaultPositiveUpper}, {true}, {true});
}

double sample_mean(std::span<const double> data) {
  return std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
}

class Lognormal final : public FamilyModel {
 public:
  Lognormal()
      : FamilyModel("lognormal", positive_box(),
                    {SupportKind::continuous, 0.0, kInf}, Coordinate::log, {true}) {}

  double log_density_unchecked(std::span<const double> p, double x) const override {
    return log_density_coord(p, std::log(x));
  }
  double log_density_coord(std::span<const double> p, double s) const override {
    const double th = p[0];
    return -s - kLogSqrt2Pi - 0.5 * std::log(th) - s * s / (2.0 * th);
  }
  std::pair<double, double> coordinate_hint(std::span<const double> p) const override {
    return {0.0, std::sqrt(p[0])};
  }
  bool valid_params(std::span<const double> p) const override {
    return p.size() == 1 && p[0] > 0.0 && std::isfinite(p[0]);
  }
  void score(std::span<const double> p, double x, std::span<double> out) const override {
    const double l = std::log(x);
    out[0] = -0.5 / p[0] + l * l / (2.0 * p[0] * p[0]);
  }
  double mean(std::span<const double> p) const override { return std::exp(0.5 * p[0]); }
  double variance(std::span<const double> p) const override {
    return std::expm1(p[0]) * std::exp(p[0]);
  }
  double draw(std::span<const double> p, CounterRng& rng) const override {
    return std::exp(std::sqrt(p[0]) * rng.normal());
  }
  std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const override {
    double s = 0.0;
    for (double x : data) s += std::log(x) * std::log(x);
    return std::vector<double>{s / static_cast<double>(data.size())};
  }
};

class Exponential final : public FamilyModel {
 public:
  Exponential()
      : FamilyModel("exponential", positive_box(),
                    {SupportKind::continuous, 0.0, kInf}, Coordinate::log, {true}) {}

  double log_density_unchecked(std::span<const double> p, double x) const override {
    return -std::log(p[0]) - x / p[0];
  }
  double log_density_coord(std::span<const double> p, double s) const override {
    return -std::log(p[0]) - std::exp(s) / p[0];
  }
  std::pair<double, double> coordinate_hint(std::span<const double> p) const override {
    // log of an exponential variate has sd pi / sqrt(6).
    return {std::log(p[0]) - 0.5772156649, 1.2825};
  }
  bool valid_params(std::span<const double> p) const override {
    return p.size() == 1 && p[0] > 0.0 && std::isfinite(p[0]);
  }
  void score(std::span<const double> p, double x, std::span<double> out) const override {
    out[0] = -1.0 / p[0] + x / (p[0] * p[0]);
  }
  double mean(std::span<const double> p) const override { return p[0]; }
  double variance(std::span<const double> p) const override { return p[0] * p[0]; }
  double draw(std::span<const double> p, CounterRng& rng) const override {
    return p[0] * rng.exponential();
  }
  std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const override {
    return std::vector<double>{sample_mean(data)};
  }
};

class Poisson final : public FamilyModel {
 public:
  Poisson()
      : FamilyModel("poisson", positive_box(), {SupportKind::lattice, 0.0, kInf},
                    Coordinate::identity, {true}) {}

  double log_density_unchecked(std::span<const double> p, double x) const override {
    return -p[0] + x * std::log(p[0]) - std::lgamma(x + 1.0);
  }
  std::pair<double, double> coordinate_hint(std::span<const double> p) const override {
    return {p[0], std::sqrt(p[0])};
  }
  bool valid_params(std::span<const double> p) const override {
    return p.size() == 1 && p[0] > 0.0 && std::isfinite(p[0]);
  }
  void score(std::span<const double> p, double x, std::span<double> out) const override {
    out[0] = -1.0 + x / p[0];
  }
  double mean(std::span<const double> p) const override { return p[0]; }
  double variance(std::span<const double> p) const override { return p[0]; }
  double draw(std::span<const double> p, CounterRng& rng) const override {
    const double mu = p[0];
    if (mu < 10.0) {
      // Sequential inversion.
      double u = rng.uniform();
      double pk = std::exp(-mu);
      double k = 0.0;
      while (u > pk) {
        u -= pk;
        k += 1.0;
        pk *= mu / k;
        if (pk == 0.0) break;
      }
      return k;
    }
    // Hormann's PTRS transformed rejection.
    const double smu = std::sqrt(mu);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
      const double u = rng.uniform() - 0.5;
      const double v = rng.uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -mu + k * log_mu - std::lgamma(k + 1.0)) {
        return k;
      }
    }
  }
  std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const override {
    return std::vector<double>{sample_mean(data)};
  }
};

class Geometric final : public FamilyModel {
 public:
  Geometric()
      : FamilyModel("geometric", positive_box(), {SupportKind::lattice, 0.0, kInf},
                    Coordinate::identity, {true}) {}

  double log_density_unchecked(std::span<const double> p, double x) const override {
    return x * std::log(p[0]) - (x + 1.0) * std::log1p(p[0]);
  }
  std::pair<double, double> coordinate_hint(std::span<const double> p) const override {
    return {p[0], std::sqrt(p[0] * (1.0 + p[0]))};
  }
  bool valid_params(std::span<const double> p) const override {
    return p.size() == 1 && p[0] > 0.0 && std::isfinite(p[0]);
  }
  void score(std::span<const double> p, double x, std::span<double> out) const override {
    out[0] = x / p[0] - (x + 1.0) / (1.0 + p[0]);
  }
  double mean(std::span<const double> p) const override { return p[0]; }
  double variance(std::span<const double> p) const override { return p[0] * (1.0 + p[0]); }
  double draw(std::span<const double> p, CounterRng& rng) const override {
    // P(X >= k) = q^k with q = gamma / (1 + gamma).
    const double log_q = std::log(p[0]) - std::log1p(p[0]);
    return std::floor(std::log(rng.uniform()) / log_q);
  }
  std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const override {
    return std::vector<double>{sample_mean(data)};
  }
};

class Gaussian final : public FamilyModel {
 public:
  Gaussian()
      : FamilyModel("gaussian-linear", ParamBox({-50.0}, {50.0}, {true}, {true}),
                    {SupportKind::continuous, -kInf, kInf}, Coordinate::identity, {false}) {}

  double log_density_unchecked(std::span<const double> p, double x) const override {
    const double r = x - p[0];
    return -kLogSqrt2Pi - 0.5 * r * r;
  }
  std::pair<double, double> coordinate_hint(std::span<const double> p) const override {
    return {p[0], 1.0};
  }
  bool valid_params(std::span<const double> p) const override {
    return p.size() == 1 && std::isfinite(p[0]);
  }
  void score(std::span<const double> p, double x, std::span<double> out) const override {
    out[0] = x - p[0];
  }
  double mean(std::span<const double> p) const override { return p[0]; }
  double variance(std::span<const double>) const override { return 1.0; }
  double draw(std::span<const double> p, CounterRng& rng) const override {
    return p[0] + rng.normal();
  }
  std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const override {
    return std::vector<double>{sample_mean(data)};
  }
};

class Bernoulli final : public FamilyModel {
 public:
  Bernoulli()
      : FamilyModel("bernoulli", ParamBox({1e-3}, {1.0 - 1e-3}, {true}, {true}),
                    {SupportKind::lattice, 0.0, 1.0}, Coordinate::identity, {false}) {}

  double log_density_unchecked(std::span<const double> p, double x) const override {
    return x > 0.5 ? std::log(p[0]) : std::log1p(-p[0]);
  }
  std::pair<double, double> coordinate_hint(std::span<const double> p) const override {
    return {p[0], 0.5};
  }
  bool valid_params(std::span<const double> p) const override {
    return p.size() == 1 && p[0] > 0.0 && p[0] < 1.0;
  }
  void score(std::span<const double> p, double x, std::span<double> out) const override {
    out[0] = x > 0.5 ? 1.0 / p[0] : -1.0 / (1.0 - p[0]);
  }
  double mean(std::span<const double> p) const override { return p[0]; }
  double variance(std::span<const double> p) const override { return p[0] * (1.0 - p[0]); }
  double draw(std::span<const double> p, CounterRng& rng) const override {
    return rng.uniform() < p[0] ? 1.0 : 0.0;
  }
  std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const override {
    return std::vector<double>{sample_mean(data)};
  }
};

}  // namespace

bool Support::contains(double x) const noexcept {
  if (std::isnan(x)) return false;
  if (kind == SupportKind::continuous) return x > lower && x < upper;
  return x >= lower && x <= upper && x == std::floor(x);
}

bool Support::same_as(const Support& other) const noexcept {
  return kind == other.kind && lower == other.lower && upper == other.upper;
}

FamilyModel::FamilyModel(std::string id, ParamBox space, Support support, Coordinate coord,
                         std::vector<bool> log_scale)
    : id_(std::move(id)),
      space_(std::move(space)),
      support_(support),
      coordinate_(coord),
      log_scale_(std::move(log_scale)) {}

void FamilyModel::check_params(std::span<const double> params) const {
  if (!valid_params(params)) {
    std::ostringstream os;
    os << id_ << ": invalid parameter vector (";
    for (std::size_t i = 0; i < params.size(); ++i) os << (i ? ", " : "") << params[i];
    os << ")";
    throw ParameterError(os.str());
  }
}

double FamilyModel::log_density(std::span<const double> params, double x) const {
  check_params(params);
  if (!support_.contains(x)) {
    std::ostringstream os;
    os << id_ << ": observation " << x << " outside the support";
    throw DomainError(os.str());
  }
  return log_density_unchecked(params, x);
}

double FamilyModel::log_density_coord(std::span<const double> params, double s) const {
  return log_density_unchecked(params, to_observation(s));
}

double FamilyModel::log_jacobian(double s) const noexcept {
  return coordinate_ == Coordinate::log ? s : 0.0;
}

double FamilyModel::to_observation(double s) const noexcept {
  return coordinate_ == Coordinate::log ? std::exp(s) : s;
}

double FamilyModel::to_coordinate(double x) const noexcept {
  return coordinate_ == Coordinate::log ? std::log(x) : x;
}

void FamilyModel::score(std::span<const double> params, double x, std::span<double> out) const {
  std::vector<double> p(params.begin(), params.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
    const double orig = p[i];
    p[i] = orig + h;
    const double up = log_density_unchecked(p, x);
    p[i] = orig - h;
    const double down = log_density_unchecked(p, x);
    p[i] = orig;
    out[i] = (up - down) / (2.0 * h);
  }
}

std::vector<double> FamilyModel::sample(std::span<const double> params, std::size_t count,
                                        std::uint64_t seed, std::uint64_t stream) const {
  check_params(params);
  CounterRng rng(seed, stream);
  std::vector<double> out(count);
  for (auto& x : out) x = draw(params, rng);
  return out;
}

std::optional<std::vector<double>> FamilyModel::closed_form_mle(std::span<const double>) const {
  return std::nullopt;
}

double FamilyModel::log_likelihood(std::span<const double> params,
                                   std::span<const double> data) const {
  double s = 0.0;
  for (double x : data) s += log_density_unchecked(params, x);
  return s;
}

std::vector<double> FamilyModel::mle(std::span<const double> data) const {
  return mle(data, space_);
}

std::vector<double> FamilyModel::mle(std::span<const double> data, const ParamBox& box) const {
  if (data.empty()) throw DomainError(id_ + ": MLE of empty data");
  if (auto cf = closed_form_mle(data)) {
    auto& p = *cf;
    for (auto& v : p) {
      if (std::isnan(v)) throw NumericError(id_ + ": closed-form MLE is NaN");
    }
    box.project_inplace(p);
    return p;
  }
  return mle_numeric(data, box);
}

std::vector<double> FamilyModel::mle_numeric(std::span<const double> data,
                                             const ParamBox& box) const {
  if (data.empty()) throw DomainError(id_ + ": MLE of empty data");
  SearchSpace space(box, log_scale_);
  auto objective = [&](std::span<const double> y) {
    const auto p = space.from_search(y);
    if (!valid_params(p)) return kInf;
    return -log_likelihood(p, data);
  };
  // Multistart: best three nodes of a coarse grid.
  const std::size_t points = box.free_dim() <= 2 ? 9 : 3;
  auto nodes = space.grid_nodes(points);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    ranked.emplace_back(objective(space.to_search(nodes[i])), i);
  }
  std::sort(ranked.begin(), ranked.end());
  const ParamBox sbox = space.search_box();
  opt::SimplexOptions so;
  so.xtol = 1e-10;
  so.ftol = 1e-14;
  so.max_evaluations = 4000;
  so.step = space.grid_step(points);
  opt::SimplexResult best;
  best.fx = kInf;
  bool any_converged = false;
  for (std::size_t r = 0; r < std::min<std::size_t>(3, ranked.size()); ++r) {
    auto res = opt::nelder_mead(objective, space.to_search(nodes[ranked[r].second]), sbox, so);
    any_converged = any_converged || res.converged;
    if (res.fx < best.fx) best = res;
  }
  if (!any_converged || !std::isfinite(best.fx)) {
    std::ostringstream os;
    os << id_ << ": numerical MLE did not converge (best negative log-likelihood " << best.fx
       << ")";
    throw OptimizationError(os.str(), best.x.empty() ? std::vector<double>{} : space.from_search(best.x),
                            best.fx);
  }
  auto p = space.from_search(best.x);
  box.project_inplace(p);
  return p;
}

FamilyPtr make_lognormal() { return std::make_shared<Lognormal>(); }
FamilyPtr make_exponential() { return std::make_shared<Exponential>(); }
FamilyPtr make_poisson() { return std::make_shared<Poisson>(); }
FamilyPtr make_geometric() { return std::make_shared<Geometric>(); }
FamilyPtr make_gaussian() { return std::make_shared<Gaussian>(); }
FamilyPtr make_bernoulli() { return std::make_shared<Bernoulli>(); }

FamilyPtr make_family(std::string_view id) {
  if (id == "lognormal") return make_lognormal();
  if (id == "exponential") return make_exponential();
  if (id == "poisson") return make_poisson();
  if (id == "geometric") return make_geometric();
  if (id == "gaussian-linear" || id == "gaussian") return make_gaussian();
  if (id == "bernoulli") return make_bernoulli();
  throw ParameterError("unknown family id '" + std::string(id) + "'");
}

std::vector<std::string> family_ids() {
  return {"lognormal", "exponential", "poisson", "geometric", "gaussian-linear", "bernoulli"};
}

double log_total_mass(const FamilyModel& family, std::span<const double> params,
                      const quad::Options& opt) {
  family.check_params(params);
  const bool continuous = family.support().kind == SupportKind::continuous;
  auto res = integrate_support<0>(
      family, params,
      [&](double x, double s) {
        quad::Point<0> p;
        p.log_weight = continuous ? family.log_density_coord(params, s)
                                  : family.log_density_unchecked(params, x);
        return p;
      },
      opt);
  return res.log_mass;
}

double kl_divergence(const FamilyModel& g, std::span<const double> theta, const FamilyModel& h,
                     std::span<const double> gamma, const quad::Options& opt) {
  g.check_params(theta);
  h.check_params(gamma);
  if (!g.support().same_as(h.support())) {
    throw DomainError("kl_divergence: families " + g.id() + " and " + h.id() +
                      " have different supports");
  }
  const bool continuous = g.support().kind == SupportKind::continuous;
  auto res = integrate_support<1>(
      g, theta,
      [&](double x, double s) {
        quad::Point<1> p;
        const double lg = continuous ? g.log_density_coord(theta, s) : g.log_density_unchecked(theta, x);
        const double lh = continuous ? h.log_density_coord(gamma, s) : h.log_density_unchecked(gamma, x);
        p.log_weight = lg;
        p.values[0] = (lg == lh) ? 0.0 : lg - lh;
        if (!std::isfinite(p.values[0])) p.values[0] = 0.0;
        return p;
      },
      opt);
  return res.mean[0];
}

SeparationReport check_separation(const FamilyModel& g, const ParamBox& theta_box,
                                  const FamilyModel& h, const ParamBox& gamma_box,
                                  const SeparationConfig& config) {
  if (!g.support().same_as(h.support())) {
    throw DomainError("check_separation: families " + g.id() + " and " + h.id() +
                      " have different supports");
  }
  const std::size_t dg = theta_box.dim();
  SearchSpace space(theta_box, g.log_scale(), gamma_box, h.log_scale());
  auto kl_at = [&](std::span<const double> p) {
    std::span<const double> th(p.data(), dg), ga(p.data() + dg, p.size() - dg);
    return kl_divergence(g, th, h, ga, config.quad);
  };
  auto nodes = space.grid_nodes(config.grid_points);
  std::size_t best = 0;
  double best_val = kInf;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double v = kl_at(nodes[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  opt::SimplexOptions so;
  so.xtol = 1e-8;
  so.ftol = 1e-12;
  so.step = space.grid_step(config.grid_points);
  auto res = opt::nelder_mead(
      [&](std::span<const double> y) {
        try {
          return kl_at(space.from_search(y));
        } catch (const NumericError&) {
          return kInf;
        }
      },
      space.to_search(nodes[best]), space.search_box(), so);
  std::vector<double> arg = nodes[best];
  double val = best_val;
  if (res.fx < val) {
    val = res.fx;
    arg = space.from_search(res.x);
  }
  SeparationReport rep;
  rep.min_kl = std::max(0.0, val);
  rep.theta_argmin.assign(arg.begin(), arg.begin() + static_cast<long>(dg));
  rep.gamma_argmin.assign(arg.begin() + static_cast<long>(dg), arg.end());
  rep.threshold = config.threshold;
  rep.separated = rep.min_kl > config.threshold;
  return rep;
}

}  // namespace gci
