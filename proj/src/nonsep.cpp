#include "gci/nonsep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gci/error.hpp"
#include "gci/optimize.hpp"
#include "gci/parallel.hpp"
#include "gci/rng.hpp"
#include "gci/search_space.hpp"

namespace gci {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

InnerSolution inner_lambda(const std::function<LogMgfValue(double)>& mgf, double tol,
                           double hint) {
  const LogMgfValue v0 = mgf(0.0);
  InnerSolution out;
  out.slope = v0.d1;
  // Lambda'(0) >= 0: the event is not rare and the bound is trivial, so the
  // infimum over lambda >= 0 sits at 0.
  if (v0.d1 >= 0.0) return out;
  const double dir = 1.0;
  double prev = 0.0;
  LogMgfValue prev_v = v0;
  prev_v.value = 0.0;
  double z = dir * std::max(std::abs(hint), 1e-3);
  bool bracketed = false;
  LogMgfValue zv;
  for (int k = 0; k < 60 && !bracketed; ++k) {
    try {
      zv = mgf(z);
      if (sign(zv.d1) != sign(v0.d1)) {
        bracketed = true;
        break;
      }
      prev = z;
      prev_v = zv;
      z *= 2.0;
    } catch (const NumericError&) {
      // Bisect towards the edge of the finiteness domain.
      double hi = z;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (prev + hi);
        try {
          const LogMgfValue mv = mgf(mid);
          if (sign(mv.d1) != sign(v0.d1)) {
            z = mid;
            zv = mv;
            bracketed = true;
            break;
          }
          prev = mid;
          prev_v = mv;
        } catch (const NumericError&) {
          hi = mid;
        }
        if (std::abs(hi - prev) <= tol * (1.0 + std::abs(prev))) break;
      }
      break;
    }
  }
  if (!bracketed) {
    out.lambda = prev;
    out.log_m = prev_v.value;
    out.slope = prev_v.d1;
    out.at_edge = true;
    return out;
  }
  const auto root = opt::find_root([&](double l) { return mgf(l).d1; }, prev, z, prev_v.d1, zv.d1,
                                   tol, 200);
  const LogMgfValue rv = mgf(root.x);
  out.lambda = root.x;
  out.log_m = rv.value;
  out.slope = rv.d1;
  return out;
}

namespace {

struct MiddleResult {
  std::vector<double> gamma;
  double lambda = 0.0;
  double value = -kInf;
  bool at_edge = false;
  bool gamma_tie = false;  // another gamma, well separated, reaches the same value
};

class MinimaxSolver {
 public:
  MinimaxSolver(const TiltMgf& mgf, const ParamBox& theta_box, const std::vector<bool>& theta_log,
                const ParamBox& gamma_box, const std::vector<bool>& gamma_log,
                const TiltConfig& config)
      : mgf_(mgf),
        theta_space_(theta_box, theta_log),
        gamma_space_(gamma_box, gamma_log),
        config_(config) {
    const auto step = gamma_space_.grid_step(config_.gamma_grid);
    CounterRng rng(config_.seed, 0x9a3f);
    gamma_offsets_.assign(config_.gamma_perturbations, std::vector<double>(step.size()));
    for (auto& off : gamma_offsets_)
      for (std::size_t i = 0; i < step.size(); ++i) off[i] = (rng.uniform() - 0.5) * step[i];
    gamma_nodes_ = gamma_space_.grid_nodes(config_.gamma_grid);
  }

  InnerSolution inner(const std::vector<double>& theta, const std::vector<double>& gamma,
                      double hint) const {
    return inner_lambda([&](double l) { return mgf_(theta, gamma, l); }, config_.lambda_tol, hint);
  }

  // sup over gamma of inf over lambda, at fixed theta.
  MiddleResult middle(const std::vector<double>& theta) const {
    MiddleResult best;
    auto eval = [&](const std::vector<double>& gamma, double hint, MiddleResult& into) {
      try {
        const auto in = inner(theta, gamma, hint);
        into = {gamma, in.lambda, in.log_m, in.at_edge};
      } catch (const NumericError&) {
        into = {gamma, 0.0, -kInf, true};
      }
    };
    std::vector<MiddleResult> cells(gamma_nodes_.size());
    for (std::size_t i = 0; i < gamma_nodes_.size(); ++i) eval(gamma_nodes_[i], 0.5, cells[i]);
    std::size_t bi = 0;
    for (std::size_t i = 1; i < cells.size(); ++i)
      if (cells[i].value > cells[bi].value) bi = i;
    best = cells[bi];
    if (gamma_space_.box().is_point() || !std::isfinite(best.value)) return best;

    const ParamBox sbox = gamma_space_.search_box();
    opt::SimplexOptions so;
    so.xtol = config_.xtol;
    so.ftol = 1e-14;
    so.max_evaluations = 800;
    so.step = gamma_space_.grid_step(config_.gamma_grid);
    for (auto& s : so.step) s *= 0.5;
    const auto start = gamma_space_.to_search(best.gamma);
    std::vector<std::vector<double>> starts{start};
    for (const auto& off : gamma_offsets_) {
      auto s = start;
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += off[i];
      sbox.project_inplace(s);
      starts.push_back(s);
    }
    double hint = best.lambda;
    std::vector<MiddleResult> found;
    for (const auto& s : starts) {
      MiddleResult last;
      auto res = opt::nelder_mead(
          [&](std::span<const double> y) {
            eval(gamma_space_.from_search(y), hint, last);
            return -last.value;
          },
          s, sbox, so);
      MiddleResult cand;
      eval(gamma_space_.from_search(res.x), hint, cand);
      if (res.converged) found.push_back(cand);
      if (cand.value > best.value ||
          (cand.value == best.value && lex_less(cand.gamma, best.gamma))) {
        best = cand;
      }
    }
    for (const auto& f : found) {
      if (std::abs(f.value - best.value) > 1e-8) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < f.gamma.size(); ++k) d = std::max(d, std::abs(f.gamma[k] - best.gamma[k]));
      if (d > 1e-3) best.gamma_tie = true;
    }
    return best;
  }

  Saddle solve() const {
    const auto nodes = theta_space_.grid_nodes(config_.theta_grid);
    std::vector<MiddleResult> grid(nodes.size());
    parallel_for(nodes.size(), config_.threads, [&](std::size_t i) { grid[i] = middle(nodes[i]); });
    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return grid[a].value < grid[b].value; });

    struct Candidate {
      std::vector<double> theta;
      MiddleResult mid;
      bool converged = false;
    };
    std::vector<Candidate> cands;
    cands.push_back({nodes[order.front()], grid[order.front()], theta_space_.box().is_point()});
    if (!theta_space_.box().is_point()) {
      const ParamBox sbox = theta_space_.search_box();
      opt::SimplexOptions so;
      so.xtol = config_.xtol;
      so.ftol = 1e-14;
      so.max_evaluations = 600;
      so.step = theta_space_.grid_step(config_.theta_grid);
      for (auto& s : so.step) s *= 0.5;
      const std::size_t starts = std::min(config_.theta_starts, order.size());
      std::vector<Candidate> refined(starts);
      parallel_for(starts, config_.threads, [&](std::size_t k) {
        const auto& node = nodes[order[k]];
        auto res = opt::nelder_mead(
            [&](std::span<const double> y) { return middle(theta_space_.from_search(y)).value; },
            theta_space_.to_search(node), sbox, so);
        auto th = theta_space_.from_search(res.x);
        refined[k] = {th, middle(th), res.converged};
      });
      for (auto& c : refined) cands.push_back(std::move(c));
      // Away from theta0 some gamma usually matches g_theta on average, so the
      // middle value is 0 on most of the box and a coarse grid can miss the
      // pocket around theta0 altogether.
      for (auto seed : config_.theta_seeds) {
        theta_space_.box().project_inplace(seed);
        auto res = opt::nelder_mead(
            [&](std::span<const double> y) { return middle(theta_space_.from_search(y)).value; },
            theta_space_.to_search(seed), sbox, so);
        auto th = theta_space_.from_search(res.x);
        cands.push_back({th, middle(th), res.converged});
      }
    }

    const bool any_converged =
        std::any_of(cands.begin(), cands.end(), [](const Candidate& c) { return c.converged; });
    std::size_t bi = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      const auto& a = cands[i];
      const auto& b = cands[bi];
      if (!std::isfinite(a.mid.value)) continue;
      const double tol = 1e-12 * std::max(1.0, std::abs(b.mid.value));
      if (a.mid.value < b.mid.value - tol ||
          (std::abs(a.mid.value - b.mid.value) <= tol && lex_less(a.theta, b.theta))) {
        bi = i;
      }
    }
    const auto& win = cands[bi];
    if (!any_converged || !std::isfinite(win.mid.value)) {
      auto inc = win.theta;
      inc.insert(inc.end(), win.mid.gamma.begin(), win.mid.gamma.end());
      throw OptimizationError("solve_minimax: outer theta search did not converge", inc,
                              win.mid.value);
    }
    Saddle s;
    s.theta = win.theta;
    s.gamma = win.mid.gamma;
    s.lambda = win.mid.lambda;
    s.log_m = win.mid.value;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto& a = cands[i];
        const auto& b = cands[j];
        if (!a.converged || !b.converged) continue;
        if (std::abs(a.mid.value - win.mid.value) > 1e-8 ||
            std::abs(b.mid.value - win.mid.value) > 1e-8)
          continue;
        double d = 0.0;
        for (std::size_t k = 0; k < a.theta.size(); ++k) d = std::max(d, std::abs(a.theta[k] - b.theta[k]));
        for (std::size_t k = 0; k < a.mid.gamma.size(); ++k)
          d = std::max(d, std::abs(a.mid.gamma[k] - b.mid.gamma[k]));
        if (d > 1e-3) s.multiple_optima = true;
      }
    }
    if (win.mid.gamma_tie) s.multiple_optima = true;
    if (s.multiple_optima) s.warnings.push_back("several saddles attain the optimum value");
    if (win.mid.at_edge) s.warnings.push_back("inner lambda infimum on the edge of its domain");
    return s;
  }

 private:
  const TiltMgf& mgf_;
  SearchSpace theta_space_;
  SearchSpace gamma_space_;
  TiltConfig config_;
  std::vector<std::vector<double>> gamma_offsets_;
  std::vector<std::vector<double>> gamma_nodes_;
};

}  // namespace

Saddle solve_minimax(const TiltMgf& mgf, const ParamBox& theta_box,
                     const std::vector<bool>& theta_log, const ParamBox& gamma_box,
                     const std::vector<bool>& gamma_log, const TiltConfig& config) {
  MinimaxSolver solver(mgf, theta_box, theta_log, gamma_box, gamma_log, config);
  return solver.solve();
}

LogMgfSpec TiltedMeasure::mgf_spec(const quad::Options& quad) const {
  LogMgfSpec s;
  s.gfam = gfam;
  s.hfam = hfam;
  s.base_params = theta0;
  s.g_params = theta_dag;
  s.h_params = gamma_dag;
  s.offset_b = offset_b;
  s.quad = quad;
  return s;
}

double rate_nonsep(const TiltedMeasure& tilt) { return -tilt.log_M_dag; }

FeasibilityReport feasibility_b(const FamilyPtr& g, const std::vector<double>& theta0,
                                const FamilyPtr& h, const ParamBox& gamma_box, double b,
                                std::size_t grid_points, const quad::Options& quad) {
  g->check_params(theta0);
  SearchSpace space(gamma_box, h->log_scale());
  auto elr = [&](const std::vector<double>& gamma) {
    LogMgfSpec s;
    s.gfam = g;
    s.hfam = h;
    s.base_params = theta0;
    s.g_params = theta0;
    s.h_params = gamma;
    s.quad = quad;
    return expected_log_ratio(s);
  };
  const auto nodes = space.grid_nodes(grid_points);
  std::size_t bi = 0;
  std::vector<double> vals(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    vals[i] = elr(nodes[i]);
    if (vals[i] > vals[bi]) bi = i;
  }
  FeasibilityReport rep;
  rep.gamma_argmax = nodes[bi];
  rep.sup_expected_log_ratio = vals[bi];
  if (!gamma_box.is_point()) {
    opt::SimplexOptions so;
    so.xtol = 1e-9;
    so.ftol = 1e-14;
    so.step = space.grid_step(grid_points);
    auto res = opt::nelder_mead(
        [&](std::span<const double> y) {
          try {
            return -elr(space.from_search(y));
          } catch (const NumericError&) {
            return kInf;
          }
        },
        space.to_search(nodes[bi]), space.search_box(), so);
    if (-res.fx > rep.sup_expected_log_ratio) {
      rep.sup_expected_log_ratio = -res.fx;
      rep.gamma_argmax = space.from_search(res.x);
    }
  }
  rep.feasible = rep.sup_expected_log_ratio < b;
  rep.inf_kl = std::max(0.0, -rep.sup_expected_log_ratio);
  rep.kl_positive = rep.inf_kl > 1e-6;
  return rep;
}

TiltedMeasure solve_tilt(const FamilyPtr& g, const FamilyPtr& h, const ParamBox& theta_box,
                         const ParamBox& gamma_box, const std::vector<double>& theta0, double b,
                         const TiltConfig& config) {
  if (theta_box.dim() != g->dim() || gamma_box.dim() != h->dim()) {
    throw ParameterError("solve_tilt: box dimension does not match family");
  }
  const auto feas = feasibility_b(g, theta0, h, gamma_box, b, 21, config.quad);
  if (!feas.feasible) {
    std::ostringstream os;
    os << "solve_tilt: threshold b = " << b
       << " does not exceed sup_gamma E log(h/g) = " << feas.sup_expected_log_ratio;
    throw ParameterError(os.str());
  }
  TiltMgf mgf = [&](const std::vector<double>& theta, const std::vector<double>& gamma,
                    double lambda) {
    LogMgfSpec s;
    s.gfam = g;
    s.hfam = h;
    s.base_params = theta0;
    s.g_params = theta;
    s.h_params = gamma;
    s.offset_b = b;
    s.quad = config.quad;
    return log_mgf_all(s, lambda);
  };
  TiltConfig seeded = config;
  seeded.theta_seeds.push_back(theta0);
  const Saddle sad = solve_minimax(mgf, theta_box, g->log_scale(), gamma_box, h->log_scale(), seeded);
  TiltedMeasure t;
  t.gfam = g;
  t.hfam = h;
  t.theta0 = theta0;
  t.offset_b = b;
  t.theta_dag = sad.theta;
  t.gamma_dag = sad.gamma;
  t.lambda_dag = sad.lambda;
  t.log_M_dag = sad.log_m;
  t.multiple_optima = sad.multiple_optima;
  t.warnings = sad.warnings;
  if (!feas.kl_positive) t.warnings.push_back("inf over gamma of KL(g_theta0 || h_gamma) is zero");
  for (const auto& w : sad.warnings) {
    if (w.find("edge") != std::string::npos) {
      throw DivergenceError("solve_tilt: Lambda' has no root at the saddle (one-sided drift)",
                            "lambda");
    }
  }
  if (!(t.lambda_dag > 0.0)) t.warnings.push_back("lambda_dag is not positive");
  return t;
}

EulerDiagnostics classify_scores(const std::vector<double>& theta_scores,
                                 const std::vector<double>& gamma_scores,
                                 const std::vector<double>& theta, const ParamBox& theta_box,
                                 const std::vector<double>& gamma, const ParamBox& gamma_box,
                                 double tolerance) {
  EulerDiagnostics d;
  d.tolerance = tolerance;
  auto add = [&](const char* name, const std::vector<double>& scores, const std::vector<double>& p,
                 const ParamBox& box) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      ScoreCheck c;
      c.name = name;
      c.index = i;
      c.expected_score = scores[i];
      const double tol_face = 1e-6 * std::max(1.0, box.upper()[i] - box.lower()[i]);
      if (box.pinned(i)) {
        c.position = "pinned";
      } else if (p[i] <= box.lower()[i] + tol_face) {
        c.position = "lower";
        c.pass = scores[i] <= tolerance;
      } else if (p[i] >= box.upper()[i] - tol_face) {
        c.position = "upper";
        c.pass = -scores[i] <= tolerance;
      } else {
        c.position = "interior";
        c.pass = std::abs(scores[i]) <= tolerance;
      }
      d.pass = d.pass && c.pass;
      d.checks.push_back(c);
    }
  };
  add("theta", theta_scores, theta, theta_box);
  add("gamma", gamma_scores, gamma, gamma_box);
  return d;
}

EulerDiagnostics euler_check(const TiltedMeasure& tilt, const ParamBox& theta_box,
                             const ParamBox& gamma_box, double tolerance,
                             const quad::Options& quad) {
  constexpr std::size_t kMax = 4;
  const std::size_t dg = tilt.theta_dag.size(), dh = tilt.gamma_dag.size();
  if (dg + dh > kMax) throw ParameterError("euler_check: too many parameters for quadrature");
  const auto spec = tilt.mgf_spec(quad);
  validate(spec);
  const FamilyModel& g = *tilt.gfam;
  const FamilyModel& h = *tilt.hfam;
  const bool continuous = g.support().kind == SupportKind::continuous;
  const double lam = tilt.lambda_dag;
  std::vector<double> sg(dg), sh(dh);
  auto res = integrate_support<kMax>(
      g, tilt.theta0,
      [&](double x, double s) {
        quad::Point<kMax> p;
        double lb, lg, lh;
        if (continuous) {
          lb = g.log_density_coord(tilt.theta0, s);
          lg = g.log_density_coord(tilt.theta_dag, s);
          lh = h.log_density_coord(tilt.gamma_dag, s);
        } else {
          lb = g.log_density_unchecked(tilt.theta0, x);
          lg = g.log_density_unchecked(tilt.theta_dag, x);
          lh = h.log_density_unchecked(tilt.gamma_dag, x);
        }
        const double l = lh - lg - tilt.offset_b;
        if (!std::isfinite(lb) || !std::isfinite(l)) return p;
        p.log_weight = lb + lam * l;
        g.score(tilt.theta_dag, x, sg);
        h.score(tilt.gamma_dag, x, sh);
        for (std::size_t i = 0; i < dg; ++i) p.values[i] = sg[i];
        for (std::size_t i = 0; i < dh; ++i) p.values[dg + i] = sh[i];
        return p;
      },
      quad);
  std::vector<double> ts(dg), gs(dh);
  for (std::size_t i = 0; i < dg; ++i) ts[i] = res.mean[i];
  for (std::size_t i = 0; i < dh; ++i) gs[i] = res.mean[dg + i];
  return classify_scores(ts, gs, tilt.theta_dag, theta_box, tilt.gamma_dag, gamma_box, tolerance);
}

}  // namespace gci
