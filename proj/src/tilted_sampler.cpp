#include "gci/tilted_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gci/error.hpp"

namespace gci {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw ParameterError("AliasTable: no weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("AliasTable: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw ParameterError("AliasTable: weights sum to zero");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::size_t i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (std::size_t i : small) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

std::size_t AliasTable::pick(double u) const noexcept {
  const double scaled = u * static_cast<double>(prob_.size());
  std::size_t i = static_cast<std::size_t>(scaled);
  if (i >= prob_.size()) i = prob_.size() - 1;
  const double frac = scaled - static_cast<double>(i);
  return frac < prob_[i] ? i : alias_[i];
}

double TiltedSampler::tilted_log_weight_coord(double s) const {
  const FamilyModel& g = *tilt_.gfam;
  const FamilyModel& h = *tilt_.hfam;
  const double lb = g.log_density_coord(tilt_.theta0, s);
  if (tilt_.lambda_dag == 0.0) return lb + g.log_jacobian(s);
  const double l = h.log_density_coord(tilt_.gamma_dag, s) - g.log_density_coord(tilt_.theta_dag, s) -
                   tilt_.offset_b;
  const double v = lb + tilt_.lambda_dag * l + g.log_jacobian(s);
  return std::isnan(v) ? kNegInf : v;
}

double TiltedSampler::tilted_log_weight_lattice(double k) const {
  const FamilyModel& g = *tilt_.gfam;
  const FamilyModel& h = *tilt_.hfam;
  const double lb = g.log_density_unchecked(tilt_.theta0, k);
  if (tilt_.lambda_dag == 0.0) return lb;
  const double l = h.log_density_unchecked(tilt_.gamma_dag, k) -
                   g.log_density_unchecked(tilt_.theta_dag, k) - tilt_.offset_b;
  const double v = lb + tilt_.lambda_dag * l;
  return std::isnan(v) ? kNegInf : v;
}

TiltedSampler::TiltedSampler(const TiltedMeasure& tilt, const quad::Options& quad) : tilt_(tilt) {
  validate(tilt_.mgf_spec(quad));
  const FamilyModel& g = *tilt_.gfam;
  continuous_ = g.support().kind == SupportKind::continuous;

  if (!continuous_) {
    const long lo = static_cast<long>(g.support().lower);
    const bool finite_hi = std::isfinite(g.support().upper);
    const long hi = finite_hi ? static_cast<long>(g.support().upper) : std::numeric_limits<long>::max();
    std::vector<double> lw;
    double peak = kNegInf;
    for (long k = lo;; ++k) {
      const double w = tilted_log_weight_lattice(static_cast<double>(k));
      if (w == std::numeric_limits<double>::infinity()) {
        throw DivergenceError("tilted_sampler: lattice weight overflow", "upper");
      }
      lw.push_back(w);
      peak = std::max(peak, w);
      if (k == hi) break;
      if (lw.size() >= static_cast<std::size_t>(quad.lattice_max_terms)) {
        throw DivergenceError("tilted_sampler: tilt is not normalisable on the lattice", "upper");
      }
      if (lw.size() > 1 && w < peak - 60.0 && w < lw[lw.size() - 2]) break;
    }
    lattice_lo_ = static_cast<std::size_t>(lo);
    double m = kNegInf;
    for (double w : lw) m = quad::log_add(m, w);
    log_norm_ = m;
    std::vector<double> p(lw.size());
    lattice_cum_.resize(lw.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < lw.size(); ++i) {
      p[i] = std::exp(lw[i] - m);
      cum += p[i];
      lattice_cum_[i] = cum;
    }
    support_ = lw;
    for (auto& v : support_) v -= m;
    alias_ = AliasTable(p);
    return;
  }

  auto fpoint = [&](double s) {
    quad::Point<0> p;
    p.log_weight = tilted_log_weight_coord(s);
    return p;
  };
  auto [center, scale] = g.coordinate_hint(tilt_.theta0);
  double lo_limit = -700.0, hi_limit = 700.0;
  if (g.coordinate() != Coordinate::log) {
    lo_limit = std::isfinite(g.support().lower) ? g.support().lower : center - 1e6 * scale;
    hi_limit = std::isfinite(g.support().upper) ? g.support().upper : center + 1e6 * scale;
  }
  const auto breaks = quad::locate_mass<0>(fpoint, center, scale, lo_limit, hi_limit, quad);
  if (breaks.size() < 2) throw DivergenceError("tilted_sampler: tilt carries no mass", "interior");

  double peak = kNegInf;
  for (double s : breaks) peak = std::max(peak, tilted_log_weight_coord(s));
  struct Cell {
    double a, b, fa, fb;
    int depth;
  };
  std::vector<Cell> stack;
  for (std::size_t i = breaks.size() - 1; i-- > 0;) {
    stack.push_back({breaks[i], breaks[i + 1], tilted_log_weight_coord(breaks[i]),
                     tilted_log_weight_coord(breaks[i + 1]), 0});
  }
  std::vector<double> masses;
  while (!stack.empty()) {
    Cell c = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (c.a + c.b);
    const double fm = tilted_log_weight_coord(mid);
    peak = std::max(peak, fm);
    const bool negligible = std::max({c.fa, c.fb, fm}) < peak - 80.0;
    const bool finite = std::isfinite(c.fa) && std::isfinite(c.fb) && std::isfinite(fm);
    const double dev = finite ? std::abs(fm - 0.5 * (c.fa + c.fb)) : 1.0;
    if (!negligible && dev > 1e-7 && c.depth < 40 && c.b - c.a > 1e-12 * (1.0 + std::abs(c.a))) {
      // Push the right half first so cells come off the stack left to right.
      stack.push_back({mid, c.b, fm, c.fb, c.depth + 1});
      stack.push_back({c.a, mid, c.fa, fm, c.depth + 1});
      continue;
    }
    const auto panel = quad::gk15_panel<0>(fpoint, c.a, c.b);
    cell_lo_.push_back(c.a);
    cell_hi_.push_back(c.b);
    cell_flo_.push_back(std::isfinite(c.fa) ? c.fa : fm);
    cell_fhi_.push_back(std::isfinite(c.fb) ? c.fb : fm);
    masses.push_back(panel.log_mass);
  }
  double total = kNegInf;
  for (double m : masses) total = quad::log_add(total, m);
  if (!std::isfinite(total)) throw DivergenceError("tilted_sampler: tilt is not normalisable", "interior");
  log_norm_ = total;
  std::vector<double> p(masses.size());
  cell_cum_.resize(masses.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    p[i] = std::exp(masses[i] - total);
    cum += p[i];
    cell_cum_[i] = cum;
  }
  alias_ = AliasTable(p);
}

namespace {

// u-quantile on [a, b] of a density whose log is linear from fa to fb.
double exp_linear_quantile(double a, double b, double fa, double fb, double u) {
  const double h = b - a;
  const double beta = (fb - fa) / h;
  if (!std::isfinite(beta) || std::abs(beta * h) < 1e-9) return a + u * h;
  if (beta * h > 0.0) {
    // Work from the heavy end to avoid overflow of expm1.
    const double t = std::log1p((1.0 - u) * std::expm1(-beta * h)) / (-beta);
    return b - t;
  }
  return a + std::log1p(u * std::expm1(beta * h)) / beta;
}

double exp_linear_cdf(double a, double b, double fa, double fb, double s) {
  const double h = b - a;
  const double beta = (fb - fa) / h;
  const double t = std::clamp(s - a, 0.0, h);
  if (!std::isfinite(beta) || std::abs(beta * h) < 1e-9) return t / h;
  if (beta * h > 0.0) {
    return std::exp(beta * (t - h)) * std::expm1(-beta * t) / std::expm1(-beta * h);
  }
  return std::expm1(beta * t) / std::expm1(beta * h);
}

}  // namespace

double TiltedSampler::draw(CounterRng& rng) const {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const std::size_t i = alias_.pick(u1);
  if (!continuous_) return static_cast<double>(lattice_lo_ + i);
  const double s = exp_linear_quantile(cell_lo_[i], cell_hi_[i], cell_flo_[i], cell_fhi_[i], u2);
  return tilt_.gfam->to_observation(s);
}

std::vector<double> TiltedSampler::sample(std::size_t count, std::uint64_t seed,
                                          std::uint64_t stream) const {
  CounterRng rng(seed, stream);
  std::vector<double> out(count);
  for (auto& x : out) x = draw(rng);
  return out;
}

double TiltedSampler::centered_log_ratio(double x) const {
  return tilt_.hfam->log_density_unchecked(tilt_.gamma_dag, x) -
         tilt_.gfam->log_density_unchecked(tilt_.theta_dag, x) - tilt_.offset_b;
}

double TiltedSampler::log_density(double x) const {
  const FamilyModel& g = *tilt_.gfam;
  const double lb = g.log_density_unchecked(tilt_.theta0, x);
  const double w = tilt_.lambda_dag == 0.0 ? lb : lb + tilt_.lambda_dag * centered_log_ratio(x);
  return w - log_norm_;
}

double TiltedSampler::cdf(double x) const {
  if (!continuous_) {
    const double k = std::floor(x) - static_cast<double>(lattice_lo_);
    if (k < 0) return 0.0;
    if (k >= static_cast<double>(lattice_cum_.size())) return 1.0;
    return lattice_cum_[static_cast<std::size_t>(k)];
  }
  const double s = tilt_.gfam->to_coordinate(x);
  if (s <= cell_lo_.front()) return 0.0;
  if (s >= cell_hi_.back()) return 1.0;
  const auto it = std::upper_bound(cell_lo_.begin(), cell_lo_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cell_lo_.begin()) - 1;
  const double before = i == 0 ? 0.0 : cell_cum_[i - 1];
  const double mass = cell_cum_[i] - before;
  return before + mass * exp_linear_cdf(cell_lo_[i], cell_hi_[i], cell_flo_[i], cell_fhi_[i], s);
}

std::vector<double> tilted_sampler(const TiltedMeasure& tilt, std::size_t count, std::uint64_t seed) {
  return TiltedSampler(tilt).sample(count, seed);
}

}  // namespace gci
