#include "gci/chernoff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gci/error.hpp"
#include "gci/optimize.hpp"
#include "gci/parallel.hpp"
#include "gci/search_space.hpp"

namespace gci {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SlopeProbe {
  double z = 0.0;
  double slope = 0.0;
  bool found = false;
};

// Lambda'(z) on one side of 0, expanding |z| by 2 until the slope passes t or
// the finiteness domain ends. Returns the bracket end when found.
SlopeProbe expand_for_slope(const LogMgfSpec& spec, double t, double dir, double& edge_slope) {
  double inner = 0.0;
  double z = dir;
  edge_slope = log_mgf_all(spec, 0.0).d1;
  for (int k = 0; k < 40; ++k) {
    double d1;
    try {
      d1 = log_mgf_all(spec, z).d1;
    } catch (const NumericError&) {
      // Shrink towards the finite side to find the edge of the domain.
      double lo = inner, hi = z;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        try {
          const double dm = log_mgf_all(spec, mid).d1;
          lo = mid;
          edge_slope = dm;
          if ((dm - t) * dir >= 0.0) return {mid, dm, true};
        } catch (const NumericError&) {
          hi = mid;
        }
      }
      return {lo, edge_slope, false};
    }
    edge_slope = d1;
    if ((d1 - t) * dir >= 0.0) return {z, d1, true};
    inner = z;
    z *= 2.0;
  }
  return {inner, edge_slope, false};
}

}  // namespace

double rate_function(const LogMgfSpec& spec, double t) {
  if (!std::isfinite(t)) throw ParameterError("rate_function: t must be finite");
  const auto at0 = log_mgf_all(spec, 0.0);
  const double mean = at0.d1;
  if (t == mean) return 0.0;
  const double dir = t > mean ? 1.0 : -1.0;
  double edge = 0.0;
  const SlopeProbe probe = expand_for_slope(spec, t, dir, edge);
  if (!probe.found) {
    double other = 0.0;
    expand_for_slope(spec, dir > 0 ? -kInf : kInf, -dir, other);
    const double lo = std::min(edge, other), hi = std::max(edge, other);
    std::ostringstream os;
    os << "rate_function: t = " << t << " outside the attainable slope range [" << lo << ", "
       << hi << "]";
    throw RangeError(os.str(), lo, hi);
  }
  double a = std::min(0.0, probe.z), b = std::max(0.0, probe.z);
  auto fd = [&](double z) {
    const auto v = log_mgf_all(spec, z);
    return std::pair<double, double>{v.d1 - t, v.d2};
  };
  double z;
  if (std::abs(probe.slope - t) == 0.0) {
    z = probe.z;
  } else {
    z = opt::newton_bracketed(fd, a, b, 1e-10, 200).x;
  }
  return std::max(0.0, z * t - log_mgf(spec, z));
}

ChernoffResult pairwise_index(const FamilyPtr& g, const std::vector<double>& theta,
                              const FamilyPtr& h, const std::vector<double>& gamma,
                              const quad::Options& quad) {
  auto spec = LogMgfSpec::pairwise(g, theta, h, gamma);
  spec.quad = quad;
  validate(spec);
  auto lam = [&](double z) {
    try {
      return log_mgf(spec, z);
    } catch (const DivergenceError& e) {
      throw NumericError(std::string("pairwise_index: log-MGF diverges inside (0, 1): ") +
                         e.what());
    }
  };
  const auto m = opt::brent_minimize(lam, kZMin, kZMax, 1e-9);
  ChernoffResult r;
  r.rho = std::max(0.0, -m.fx);
  r.z_star = m.x;
  r.theta_star = theta;
  r.gamma_star = gamma;
  r.diagnostics.refinement_steps = static_cast<std::size_t>(m.evaluations);
  r.diagnostics.quadrature_tol = quad.rel_tol;
  return r;
}

namespace {

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Prefer lower rho; treat values within tol as ties broken lexicographically.
bool better(double fa, const std::vector<double>& a, double fb, const std::vector<double>& b) {
  const double tol = 1e-12 * std::max(1.0, std::abs(fb));
  if (fa < fb - tol) return true;
  if (fa > fb + tol) return false;
  return lex_less(a, b);
}

}  // namespace

ChernoffResult generalized_index(const FamilyPtr& g, const ParamBox& theta_box,
                                 const FamilyPtr& h, const ParamBox& gamma_box,
                                 const IndexConfig& config) {
  if (theta_box.dim() != g->dim() || gamma_box.dim() != h->dim()) {
    throw ParameterError("generalized_index: box dimension does not match family");
  }
  const std::size_t dg = theta_box.dim();
  SearchSpace space(theta_box, g->log_scale(), gamma_box, h->log_scale());
  auto split = [&](const std::vector<double>& p) {
    return std::pair<std::vector<double>, std::vector<double>>{
        {p.begin(), p.begin() + static_cast<long>(dg)}, {p.begin() + static_cast<long>(dg), p.end()}};
  };
  auto rho_at = [&](const std::vector<double>& p) {
    auto [th, ga] = split(p);
    return pairwise_index(g, th, h, ga, config.quad);
  };

  ChernoffDiagnostics diag;
  diag.grid_resolution = config.grid_points;
  diag.quadrature_tol = config.quad.rel_tol;
  if (config.check_separation) {
    SeparationConfig sc;
    sc.quad = config.quad;
    const auto sep = check_separation(*g, theta_box, *h, gamma_box, sc);
    diag.separated = sep.separated;
    diag.min_kl = sep.min_kl;
    if (!sep.separated) diag.warnings.push_back("families are not separated on the given boxes");
  }

  const auto nodes = space.grid_nodes(config.grid_points);
  std::vector<double> values(nodes.size(), kInf);
  parallel_for(nodes.size(), config.threads, [&](std::size_t i) {
    try {
      values[i] = rho_at(nodes[i]).rho;
    } catch (const NumericError&) {
      values[i] = kInf;
    }
  });
  diag.failed_cells = static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }));

  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  if (!std::isfinite(values[order.front()])) {
    throw OptimizationError("generalized_index: every grid cell failed", nodes.front(), kInf);
  }
  std::vector<double> best = nodes[order.front()];
  double best_val = values[order.front()];
  for (std::size_t i : order) {
    if (better(values[i], nodes[i], best_val, best)) {
      best = nodes[i];
      best_val = values[i];
    }
  }

  const ParamBox sbox = space.search_box();
  opt::SimplexOptions so;
  so.xtol = config.xtol;
  so.ftol = 1e-13;
  so.max_evaluations = 1500;
  so.step = space.grid_step(config.grid_points);
  for (auto& s : so.step) s *= 0.5;
  const std::size_t starts = std::min(config.refine_starts, order.size());
  std::vector<opt::SimplexResult> refined(starts);
  auto objective = [&](std::span<const double> y) {
    try {
      return rho_at(space.from_search(y)).rho;
    } catch (const NumericError&) {
      return kInf;
    }
  };
  parallel_for(starts, config.threads, [&](std::size_t k) {
    if (!std::isfinite(values[order[k]])) return;
    refined[k] = opt::nelder_mead(objective, space.to_search(nodes[order[k]]), sbox, so);
  });
  bool any = starts == 0;
  for (const auto& r : refined) {
    if (r.x.empty() || !std::isfinite(r.fx)) continue;
    diag.refinement_steps += static_cast<std::size_t>(r.evaluations);
    if (!r.converged) continue;
    any = true;
    auto p = space.from_search(r.x);
    if (better(r.fx, p, best_val, best)) {
      best = p;
      best_val = r.fx;
    }
  }
  if (!any) {
    throw OptimizationError("generalized_index: no simplex refinement converged", best, best_val);
  }

  auto [th, ga] = split(best);
  ChernoffResult res = pairwise_index(g, th, h, ga, config.quad);
  res.diagnostics = diag;
  const auto& ls = space.log_axes();
  res.diagnostics.boundary_flag = space.box().near_truncated_face(best, 1e-6, ls);
  if (space.box().near_truncated_face(best, config.boundary_warning, ls)) {
    res.diagnostics.warnings.push_back("optimum within " +
                                       std::to_string(config.boundary_warning * 100.0).substr(0, 4) +
                                       "% of a truncated bound");
  }
  return res;
}

RateGrid contour_grid(const FamilyPtr& g, const FamilyPtr& h,
                      const std::vector<double>& theta_axis,
                      const std::vector<double>& gamma_axis, std::size_t threads,
                      const quad::Options& quad) {
  if (g->dim() != 1 || h->dim() != 1) {
    throw ParameterError("contour_grid: both families must have one parameter");
  }
  RateGrid grid;
  grid.theta_axis = theta_axis;
  grid.gamma_axis = gamma_axis;
  grid.rho.assign(theta_axis.size(),
                  std::vector<double>(gamma_axis.size(), std::numeric_limits<double>::quiet_NaN()));
  const std::size_t cols = gamma_axis.size();
  parallel_for(theta_axis.size() * cols, threads, [&](std::size_t k) {
    const std::size_t i = k / cols, j = k % cols;
    try {
      grid.rho[i][j] = pairwise_index(g, {theta_axis[i]}, h, {gamma_axis[j]}, quad).rho;
    } catch (const Error&) {
    }
  });
  return grid;
}

MultiFamilyRate multi_family_rate(const std::vector<FamilyEntry>& families,
                                  const IndexConfig& config) {
  if (families.size() < 2) throw ParameterError("multi_family_rate: need at least two families");
  MultiFamilyRate out;
  out.rho = kInf;
  for (std::size_t i = 0; i < families.size(); ++i) {
    for (std::size_t j = i + 1; j < families.size(); ++j) {
      const auto& a = families[i];
      const auto& b = families[j];
      ChernoffResult r;
      try {
        r = generalized_index(a.family, a.box, b.family, b.box, config);
      } catch (const Error& e) {
        auto label = [](const FamilyEntry& f, std::size_t k) {
          return f.label.empty() ? f.family->id() + "#" + std::to_string(k) : f.label;
        };
        std::string msg = "pair (" + label(a, i) + ", " + label(b, j) + "): " + e.what();
        if (dynamic_cast<const OptimizationError*>(&e)) {
          const auto& oe = static_cast<const OptimizationError&>(e);
          throw OptimizationError(msg, oe.incumbent(), oe.incumbent_value());
        }
        if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
        if (dynamic_cast<const DomainError*>(&e)) throw DomainError(msg);
        throw ParameterError(msg);
      }
      if (r.rho < out.rho) {
        out.rho = r.rho;
        out.worst_pair = {i, j};
      }
      out.pairs.push_back({{i, j}, std::move(r)});
    }
  }
  return out;
}

}  // namespace gci
