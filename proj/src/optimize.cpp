#include "gci/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gci/error.hpp"

namespace gci::opt {

ScalarMin brent_minimize(const std::function<double(double)>& f, double a, double b,
                         double xtol, int max_iter) {
  constexpr double kGolden = 0.3819660112501051;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  int evals = 1;
  for (int it = 0; it < max_iter; ++it) {
    const double m = 0.5 * (a + b);
    const double tol1 = xtol + 1e-12 * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (m >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= m) ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    double fu = f(u);
    ++evals;
    if (std::isnan(fu)) fu = std::numeric_limits<double>::infinity();
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

Root find_root(const std::function<double(double)>& f, double a, double b, double fa,
               double fb, double xtol, int max_iter) {
  if (fa == 0.0) return {a, fa, 0, true};
  if (fb == 0.0) return {b, fb, 0, true};
  if ((fa > 0) == (fb > 0)) throw NumericError("find_root: bracket does not change sign");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 1; it <= max_iter; ++it) {
    if ((fb > 0) == (fc > 0)) {
      c = a; fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return {b, fb, it, true};
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
  }
  return {b, fb, max_iter, false};
}

Root newton_bracketed(const std::function<std::pair<double, double>(double)>& fd, double a,
                      double b, double xtol, int max_iter) {
  double x = 0.5 * (a + b);
  double prev_step = b - a;
  for (int it = 1; it <= max_iter; ++it) {
    const auto [fx, dfx] = fd(x);
    if (fx == 0.0) return {x, fx, it, true};
    if (fx < 0.0) a = x; else b = x;
    double next = x - fx / dfx;
    const bool newton_ok = std::isfinite(next) && dfx > 0.0 && next > a && next < b &&
                           std::abs(next - x) < 0.5 * std::abs(prev_step) + xtol;
    if (!newton_ok) next = 0.5 * (a + b);
    prev_step = next - x;
    x = next;
    if (std::abs(prev_step) <= xtol * (1.0 + std::abs(x)) || b - a <= xtol * (1.0 + std::abs(x))) {
      const auto [fn, dn] = fd(x);
      (void)dn;
      return {x, fn, it, true};
    }
  }
  const auto [fx, dfx] = fd(x);
  (void)dfx;
  return {x, fx, max_iter, false};
}

namespace {

SimplexResult nelder_mead_impl(const std::function<double(std::span<const double>)>& f,
                               std::vector<double> x0, const ParamBox* box,
                               const SimplexOptions& options) {
  const std::size_t full = x0.size();
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < full; ++i) {
    if (!box || !box->pinned(i)) free_idx.push_back(i);
  }
  std::vector<double> scratch = x0;
  int evals = 0;
  auto eval = [&](const std::vector<double>& y) {
    for (std::size_t k = 0; k < free_idx.size(); ++k) scratch[free_idx[k]] = y[k];
    if (box) box->project_inplace(scratch);
    ++evals;
    const double v = f(scratch);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  const std::size_t n = free_idx.size();
  if (box) box->project_inplace(x0);
  if (n == 0) {
    scratch = x0;
    const double v = f(scratch);
    return {x0, v, 1, true};
  }
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) simplex[0][k] = x0[free_idx[k]];
  for (std::size_t j = 1; j <= n; ++j) {
    simplex[j] = simplex[0];
    const std::size_t i = free_idx[j - 1];
    double step = i < options.step.size() ? options.step[i] : 0.0;
    if (step == 0.0) step = 0.05 * std::max(1e-3, std::abs(x0[i]));
    if (box) {
      // Step inward if the vertex would leave the box.
      if (simplex[0][j - 1] + step > box->upper()[i]) step = -step;
      if (simplex[0][j - 1] + step < box->lower()[i]) step = 0.5 * (box->upper()[i] - box->lower()[i]);
    }
    simplex[j][j - 1] += step;
  }
  std::vector<double> fv(n + 1);
  for (std::size_t j = 0; j <= n; ++j) fv[j] = eval(simplex[j]);

  std::vector<std::size_t> order(n + 1);
  bool converged = false;
  while (evals < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    {
      std::vector<std::vector<double>> s2;
      std::vector<double> f2;
      for (auto o : order) {
        s2.push_back(simplex[o]);
        f2.push_back(fv[o]);
      }
      simplex.swap(s2);
      fv.swap(f2);
    }
    double xspread = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        xspread = std::max(xspread, std::abs(simplex[j][k] - simplex[0][k]) /
                                        (1.0 + std::abs(simplex[0][k])));
    const double fspread = std::abs(fv[n] - fv[0]);
    if (xspread <= options.xtol && (fspread <= options.ftol * (1.0 + std::abs(fv[0])) || !std::isfinite(fv[n]))) {
      converged = true;
      break;
    }
    if (xspread <= options.xtol * 1e-3) {
      converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[j][k] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> y(n);
      for (std::size_t k = 0; k < n; ++k) y[k] = centroid[k] + t * (simplex[n][k] - centroid[k]);
      if (box) {
        for (std::size_t k = 0; k < n; ++k)
          y[k] = std::clamp(y[k], box->lower()[free_idx[k]], box->upper()[free_idx[k]]);
      }
      return y;
    };
    auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fv[n])) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t j = 1; j <= n; ++j) {
          for (std::size_t k = 0; k < n; ++k)
            simplex[j][k] = simplex[0][k] + 0.5 * (simplex[j][k] - simplex[0][k]);
          fv[j] = eval(simplex[j]);
        }
      }
    }
  }
  std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  std::vector<double> x = x0;
  for (std::size_t k = 0; k < n; ++k) x[free_idx[k]] = simplex[best][k];
  if (box) box->project_inplace(x);
  return {x, fv[best], evals, converged};
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, const ParamBox& box,
                          const SimplexOptions& options) {
  if (x0.size() != box.dim()) throw ParameterError("nelder_mead: start point dimension mismatch");
  return nelder_mead_impl(f, std::move(x0), &box, options);
}

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, const SimplexOptions& options) {
  return nelder_mead_impl(f, std::move(x0), nullptr, options);
}

}  // namespace gci::opt
