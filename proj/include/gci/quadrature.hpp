#pragma once

// Log-space adaptive integration of positive integrands.
//
// Integrands are supplied as log-weights (so values spanning hundreds of
// orders of magnitude are fine) together with N auxiliary values; the result
// is log of the total mass and the weight-normalised means of the auxiliary
// values. This is exactly the shape needed for log-MGFs and their
// derivatives: mass = M(lambda), mean of l = Lambda'(lambda), etc.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "gci/error.hpp"

namespace gci::quad {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Options {
  /// Relative tolerance on the mass and on each auxiliary integral.
  double rel_tol = 1e-10;
  std::size_t max_panels = 4000;
  /// Tails are cut where the log-weight falls this far below the peak.
  double tail_drop = 60.0;
  /// Lattice sums stop once the geometric tail bound is below this fraction
  /// of the accumulated sum.
  double lattice_tail = 1e-14;
  long lattice_max_terms = 10'000'000;
};

template <std::size_t N>
struct Point {
  double log_weight = kNegInf;
  std::array<double, N> values{};
};

template <std::size_t N>
struct LogMoments {
  double log_mass = kNegInf;
  std::array<double, N> mean{};
  double rel_error = 0.0;
  std::size_t evaluations = 0;
  std::size_t panels = 0;
};

inline double log_add(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Streaming log-sum-exp accumulator with weighted value sums.
template <std::size_t N>
class LogAccumulator {
 public:
  void add(double log_w, const std::array<double, N>& v) {
    if (!(log_w > kNegInf)) return;
    if (log_w > max_) {
      const double scale = std::exp(max_ - log_w);
      sum_ *= scale;
      for (auto& s : vsum_) s *= scale;
      max_ = log_w;
    }
    const double w = std::exp(log_w - max_);
    sum_ += w;
    for (std::size_t k = 0; k < N; ++k) vsum_[k] += w * v[k];
  }
  double log_sum() const noexcept {
    return sum_ > 0.0 ? max_ + std::log(sum_) : kNegInf;
  }
  std::array<double, N> mean() const {
    std::array<double, N> m{};
    for (std::size_t k = 0; k < N; ++k)
      m[k] = sum_ > 0.0 ? vsum_[k] / sum_ : std::numeric_limits<double>::quiet_NaN();
    return m;
  }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
  std::array<double, N> vsum_{};
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights sit on kXgk[1], [3], [5], [7].
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double sanitize(double x) noexcept { return std::isnan(x) ? kNegInf : x; }

}  // namespace detail

template <std::size_t N>
struct Panel {
  double a = 0.0;
  double b = 0.0;
  double log_mass = kNegInf;
  double log_err = kNegInf;
  std::array<double, N> mean{};
};

/// One Gauss-Kronrod 7/15 panel evaluated in log space.
template <std::size_t N, class F>
Panel<N> gk15_panel(F& f, double a, double b) {
  Panel<N> p;
  p.a = a;
  p.b = b;
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  std::array<double, 15> lw;
  std::array<std::array<double, N>, 15> vals;
  std::array<double, 15> wk;
  std::array<double, 15> wg{};
  for (int j = 0; j < 7; ++j) {
    const double dx = h * detail::kXgk[j];
    auto lo = f(c - dx);
    auto hi = f(c + dx);
    lw[2 * j] = detail::sanitize(lo.log_weight);
    lw[2 * j + 1] = detail::sanitize(hi.log_weight);
    vals[2 * j] = lo.values;
    vals[2 * j + 1] = hi.values;
    wk[2 * j] = wk[2 * j + 1] = detail::kWgk[j];
    if (j % 2 == 1) wg[2 * j] = wg[2 * j + 1] = detail::kWg[j / 2];
  }
  {
    auto mid = f(c);
    lw[14] = detail::sanitize(mid.log_weight);
    vals[14] = mid.values;
    wk[14] = detail::kWgk[7];
    wg[14] = detail::kWg[3];
  }
  double m = kNegInf;
  for (double v : lw) m = std::max(m, v);
  if (m == kNegInf) return p;
  if (m == std::numeric_limits<double>::infinity()) {
    throw DivergenceError("integrand overflow inside panel", "interior");
  }
  double K = 0.0, G = 0.0;
  std::array<double, N> KV{}, GV{}, AV{};
  for (int i = 0; i < 15; ++i) {
    const double e = std::exp(lw[i] - m);
    if (e == 0.0) continue;
    K += wk[i] * e;
    G += wg[i] * e;
    for (std::size_t k = 0; k < N; ++k) {
      KV[k] += wk[i] * e * vals[i][k];
      GV[k] += wg[i] * e * vals[i][k];
      AV[k] += wk[i] * e * std::abs(vals[i][k]);
    }
  }
  p.log_mass = m + std::log(h * K);
  double err = std::abs(K - G);
  for (std::size_t k = 0; k < N; ++k) {
    p.mean[k] = KV[k] / K;
    err += std::abs(KV[k] - GV[k]) / (1.0 + AV[k] / K);
  }
  p.log_err = err > 0.0 ? m + std::log(h * err) : kNegInf;
  return p;
}

/// Adaptive integration over [breaks.front(), breaks.back()], starting from
/// the panels delimited by `breaks` (strictly increasing).
template <std::size_t N, class F>
LogMoments<N> integrate_breaks(F&& f, const std::vector<double>& breaks,
                               const Options& opt) {
  std::vector<Panel<N>> panels;
  panels.reserve(64);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] > breaks[i]) panels.push_back(gk15_panel<N>(f, breaks[i], breaks[i + 1]));
  }
  std::size_t evals = panels.size() * 15;
  const double log_tol = std::log(opt.rel_tol);
  double log_mass = kNegInf, log_err = kNegInf;
  for (;;) {
    log_mass = kNegInf;
    log_err = kNegInf;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      log_mass = log_add(log_mass, panels[i].log_mass);
      log_err = log_add(log_err, panels[i].log_err);
      if (panels[i].log_err > panels[worst].log_err) worst = i;
    }
    if (log_mass == kNegInf || log_err <= log_tol + log_mass) break;
    if (panels.size() >= opt.max_panels) {
      std::ostringstream os;
      os << "adaptive quadrature did not converge: relative error "
         << std::exp(log_err - log_mass) << " after " << panels.size() << " panels";
      throw NumericError(os.str());
    }
    const Panel<N> w = panels[worst];
    const double mid = 0.5 * (w.a + w.b);
    if (!(mid > w.a && mid < w.b)) {
      // Cannot split further; accept the panel as is.
      panels[worst].log_err = kNegInf;
      continue;
    }
    panels[worst] = gk15_panel<N>(f, w.a, mid);
    panels.push_back(gk15_panel<N>(f, mid, w.b));
    evals += 30;
  }
  LogMoments<N> out;
  out.log_mass = log_mass;
  out.evaluations = evals;
  out.panels = panels.size();
  out.rel_error = log_mass == kNegInf ? 0.0 : std::exp(log_err - log_mass);
  for (std::size_t k = 0; k < N; ++k) {
    double s = 0.0;
    for (const auto& p : panels) {
      if (p.log_mass == kNegInf) continue;
      s += std::exp(p.log_mass - log_mass) * p.mean[k];
    }
    out.mean[k] = log_mass == kNegInf ? std::numeric_limits<double>::quiet_NaN() : s;
  }
  return out;
}

/// Scan outward from `center` and return the breakpoints of the region that
/// carries all but exp(-tail_drop) of the mass. Throws DivergenceError when
/// the log-weight is still large or growing at `lo_limit` / `hi_limit`.
template <std::size_t N, class F>
std::vector<double> locate_mass(F& f, double center, double scale, double lo_limit,
                                double hi_limit, const Options& opt) {
  static constexpr std::array<double, 13> kSteps = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0,
                                                    4.0,  6.0, 8.0,  12.0, 16.0, 24.0};
  center = std::clamp(center, lo_limit, hi_limit);
  auto offsets = [&](double limit_dist) {
    std::vector<double> d;
    for (double s : kSteps) {
      if (s * scale >= limit_dist) break;
      d.push_back(s * scale);
    }
    double x = 32.0 * scale;
    while (!d.empty() && d.back() < limit_dist && x < limit_dist) {
      d.push_back(x);
      x *= 1.5;
    }
    d.push_back(limit_dist);
    return d;
  };
  const auto right_off = offsets(hi_limit - center);
  const auto left_off = offsets(center - lo_limit);
  std::vector<double> xs_right{center}, xs_left{center};
  for (double d : right_off) xs_right.push_back(center + d);
  for (double d : left_off) xs_left.push_back(center - d);
  auto eval = [&](double x) { return detail::sanitize(f(x).log_weight); };
  std::vector<double> lr, ll;
  for (double x : xs_right) lr.push_back(eval(x));
  ll.push_back(lr.front());
  for (std::size_t i = 1; i < xs_left.size(); ++i) ll.push_back(eval(xs_left[i]));
  double peak = kNegInf;
  for (double v : lr) peak = std::max(peak, v);
  for (double v : ll) peak = std::max(peak, v);
  if (peak == kNegInf) return {};
  if (peak == std::numeric_limits<double>::infinity()) {
    throw DivergenceError("integrand overflow while scanning for the mass", "interior");
  }
  const double cut = peak - opt.tail_drop;
  auto cut_index = [&](const std::vector<double>& lv, const char* side) {
    const std::size_t last = lv.size() - 1;
    if (lv[last] >= cut || (last > 0 && lv[last] > lv[last - 1] && lv[last] > kNegInf)) {
      std::ostringstream os;
      os << "exponential moment diverges in the " << side
         << " tail: log-integrand " << lv[last] << " at the truncation boundary (peak "
         << peak << ")";
      throw DivergenceError(os.str(), side);
    }
    std::size_t j = last;
    while (j > 0 && lv[j - 1] < cut && lv[j - 1] >= lv[j]) --j;
    return j;
  };
  const std::size_t jr = cut_index(lr, "upper");
  const std::size_t jl = cut_index(ll, "lower");
  std::vector<double> breaks;
  for (std::size_t i = jl; i >= 1; --i) breaks.push_back(xs_left[i]);
  for (std::size_t i = 0; i <= jr; ++i) breaks.push_back(xs_right[i]);
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.size() < 2) {
    breaks = {center - scale, center + scale};
  }
  return breaks;
}

/// Integral over a coordinate line [lo_limit, hi_limit] with tail detection.
template <std::size_t N, class F>
LogMoments<N> integrate_line(F&& f, double center, double scale, double lo_limit,
                             double hi_limit, const Options& opt) {
  const auto breaks = locate_mass<N>(f, center, scale, lo_limit, hi_limit, opt);
  if (breaks.empty()) {
    LogMoments<N> out;
    out.mean.fill(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  return integrate_breaks<N>(f, breaks, opt);
}

/// Sum over integers lo, lo+1, ..., hi (hi may be LONG_MAX). Terminates on a
/// geometric-ratio tail bound; reports divergence when terms keep growing.
template <std::size_t N, class F>
LogMoments<N> sum_lattice(F&& f, long lo, long hi, const Options& opt) {
  LogAccumulator<N> acc;
  LogMoments<N> out;
  double prev = kNegInf, prev_ratio = std::numeric_limits<double>::infinity();
  long growing = 0;
  // Log-convex stretch: ratios that keep rising like s log k never settle
  // below zero. k * (ratio increment) stays near s there, while a
  // convergent k^-p r^k profile has it decay like 1/k.
  long rising = 0, check_at = 2048;
  double slope_at_check = 0.0;
  const double log_tail_tol = std::log(opt.lattice_tail);
  long k = lo;
  for (;; ++k) {
    const auto p = f(static_cast<double>(k));
    const double lw = detail::sanitize(p.log_weight);
    if (lw == std::numeric_limits<double>::infinity()) {
      throw DivergenceError("lattice term overflow", "upper");
    }
    acc.add(lw, p.values);
    ++out.evaluations;
    if (k == hi) break;
    if (k - lo >= opt.lattice_max_terms) {
      throw DivergenceError("lattice series not summable within the term budget", "upper");
    }
    if (lw > kNegInf && prev > kNegInf) {
      const double ratio = lw - prev;
      if (ratio < 0.0 && ratio <= prev_ratio + 1e-12) {
        // Nonincreasing ratios r <= e^ratio: tail <= t_k r / (1 - r).
        const double log_tail = lw + ratio - std::log(-std::expm1(ratio));
        if (log_tail < acc.log_sum() + log_tail_tol) break;
      }
      if (ratio >= 0.0 && ratio >= prev_ratio - 1e-12 && k - lo > 1000) {
        if (++growing > 1000) {
          throw DivergenceError("lattice terms grow without bound", "upper");
        }
      } else {
        growing = 0;
      }
      if (ratio > prev_ratio && std::isfinite(prev_ratio)) {
        ++rising;
        if (rising >= check_at) {
          const double slope = static_cast<double>(k - lo + 1) * (ratio - prev_ratio);
          if (slope_at_check > 0.0 && slope >= 0.75 * slope_at_check) {
            throw DivergenceError("lattice terms are log-convex with unbounded ratio", "upper");
          }
          slope_at_check = slope;
          check_at *= 2;
        }
      } else {
        rising = 0;
        check_at = 2048;
        slope_at_check = 0.0;
      }
      prev_ratio = ratio;
    }
    prev = lw;
  }
  out.log_mass = acc.log_sum();
  out.mean = acc.mean();
  return out;
}

}  // namespace gci::quad
