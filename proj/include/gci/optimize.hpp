#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "gci/param_box.hpp"

namespace gci::opt {

struct ScalarMin {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

/// Brent's method (golden section + parabolic steps) on [a, b].
ScalarMin brent_minimize(const std::function<double(double)>& f, double a, double b,
                         double xtol = 1e-10, int max_iter = 200);

struct Root {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Safeguarded root of f on a sign-changing bracket [a, b]: secant /
/// inverse-quadratic steps with bisection fallback (Brent-Dekker).
Root find_root(const std::function<double(double)>& f, double a, double b, double fa,
               double fb, double xtol = 1e-12, int max_iter = 200);

/// Root of an increasing function using Newton steps kept inside a bracket
/// [a, b] with f(a) < 0 < f(b); `fd` returns {f, f'}.
Root newton_bracketed(const std::function<std::pair<double, double>(double)>& fd, double a,
                      double b, double xtol = 1e-12, int max_iter = 100);

struct SimplexOptions {
  double xtol = 1e-8;
  double ftol = 1e-12;
  int max_evaluations = 2000;
  /// Initial step per coordinate (same length as x0).
  std::vector<double> step;
};

struct SimplexResult {
  std::vector<double> x;
  double fx = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead minimisation in the unit-free coordinates of `box`:
/// candidates are clipped onto the box before every evaluation. Pinned
/// coordinates are held fixed.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, const ParamBox& box,
                          const SimplexOptions& options);

/// Unconstrained variant.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, const SimplexOptions& options);

}  // namespace gci::opt
