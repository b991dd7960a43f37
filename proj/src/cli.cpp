#include "gci/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "gci/error.hpp"

namespace gci::cli {

using io::json;

namespace {

// Strict view of a config object: unknown keys are rejected up front and
// every accessor checks the JSON type. A null value counts as absent.
class Section {
 public:
  Section(const json& j, std::string where, std::vector<std::string> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
        fail("unknown key '" + it.key() + "'");
  }

  const std::string& where() const { return where_; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json& raw(const std::string& k) const {
    if (!has(k)) fail("missing required key '" + k + "'");
    return j_.at(k);
  }
  std::string path_of(const std::string& k) const { return where_ + "." + k; }

  double real(const std::string& k, std::optional<double> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      raw(k);
    }
    return as_real(j_.at(k), path_of(k));
  }
  std::size_t count(const std::string& k, std::size_t def, std::size_t min = 0) const {
    if (!has(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(path_of(k) + ": expected a non-negative integer");
    const auto n = v.get<std::size_t>();
    if (n < min) throw ConfigError(path_of(k) + ": must be at least " + std::to_string(min));
    return n;
  }
  std::uint64_t u64(const std::string& k, std::uint64_t def) const {
    if (!has(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(path_of(k) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    if (!j_.at(k).is_boolean()) throw ConfigError(path_of(k) + ": expected true or false");
    return j_.at(k).get<bool>();
  }
  std::string text(const std::string& k, std::optional<std::string> def = std::nullopt) const {
    if (!has(k)) {
      if (def) return *def;
      raw(k);
    }
    if (!j_.at(k).is_string()) throw ConfigError(path_of(k) + ": expected a string");
    return j_.at(k).get<std::string>();
  }
  std::string choice(const std::string& k, const std::vector<std::string>& options) const {
    const std::string v = text(k, options.front());
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      std::string all;
      for (const auto& o : options) all += (all.empty() ? "" : ", ") + o;
      throw ConfigError(path_of(k) + ": '" + v + "' is not one of " + all);
    }
    return v;
  }
  std::vector<double> reals(const std::string& k) const {
    const json& v = raw(k);
    if (v.is_number()) return {as_real(v, path_of(k))};
    if (!v.is_array()) throw ConfigError(path_of(k) + ": expected a number or an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_real(v[i], path_of(k) + "[" + std::to_string(i) + "]"));
    return out;
  }

  static double as_real(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": must be finite");
    return x;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

 private:
  const json& j_;
  std::string where_;
};

std::vector<std::string> with_common(std::vector<std::string> keys) {
  for (const char* k : {"seed", "threads", "output"}) keys.emplace_back(k);
  return keys;
}

struct Context {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::filesystem::path base_dir;
};

quad::Options quad_options(const Section& s) {
  quad::Options q;
  q.rel_tol = s.real("quad_tolerance", q.rel_tol);
  if (!(q.rel_tol > 0.0 && q.rel_tol < 1e-2)) throw ConfigError(s.path_of("quad_tolerance") + ": must lie in (0, 0.01)");
  return q;
}

// ---------------------------------------------------------------- families

struct FamilySpec {
  FamilyPtr family;
  ParamBox box;
  std::string label;
};

// Bounds may be numbers or per-coordinate arrays; a missing bound (or a
// null entry) falls back to the family's default box and keeps its
// truncation flag.
std::vector<std::optional<double>> bound_list(const Section& s, const std::string& k,
                                              std::size_t dim) {
  std::vector<std::optional<double>> out(dim);
  if (!s.has(k)) return out;
  const json& v = s.raw(k);
  if (v.is_number()) {
    if (dim != 1) throw ConfigError(s.path_of(k) + ": expected an array of length " + std::to_string(dim));
    out[0] = Section::as_real(v, s.path_of(k));
    return out;
  }
  if (!v.is_array() || v.size() != dim)
    throw ConfigError(s.path_of(k) + ": expected an array of length " + std::to_string(dim));
  for (std::size_t i = 0; i < dim; ++i)
    if (!v[i].is_null()) out[i] = Section::as_real(v[i], s.path_of(k) + "[" + std::to_string(i) + "]");
  return out;
}

std::vector<std::optional<bool>> flag_list(const Section& s, const std::string& k, std::size_t dim) {
  std::vector<std::optional<bool>> out(dim);
  if (!s.has(k)) return out;
  const json& v = s.raw(k);
  if (v.is_boolean()) {
    std::fill(out.begin(), out.end(), v.get<bool>());
    return out;
  }
  if (!v.is_array() || v.size() != dim)
    throw ConfigError(s.path_of(k) + ": expected a boolean or an array of length " + std::to_string(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    if (v[i].is_null()) continue;
    if (!v[i].is_boolean()) throw ConfigError(s.path_of(k) + ": expected booleans");
    out[i] = v[i].get<bool>();
  }
  return out;
}

FamilySpec parse_family(const json& j, const std::string& where) {
  Section s(j, where, {"family", "lower", "upper", "point", "truncated_lower", "truncated_upper", "label"});
  FamilySpec spec;
  try {
    spec.family = make_family(s.text("family"));
  } catch (const ParameterError& e) {
    throw ConfigError(s.path_of("family") + ": " + e.what());
  }
  spec.label = s.text("label", spec.family->id());
  const std::size_t dim = spec.family->dim();
  const ParamBox& def = spec.family->space();

  if (s.has("point")) {
    if (s.has("lower") || s.has("upper") || s.has("truncated_lower") || s.has("truncated_upper"))
      s.fail("'point' cannot be combined with bounds");
    auto p = s.reals("point");
    if (p.size() != dim) throw ConfigError(s.path_of("point") + ": expected " + std::to_string(dim) + " values");
    if (!spec.family->valid_params(p)) throw ConfigError(s.path_of("point") + ": outside the parameter space of " + spec.family->id());
    spec.box = ParamBox::point(p);
    return spec;
  }

  auto lo = bound_list(s, "lower", dim);
  auto hi = bound_list(s, "upper", dim);
  auto tl = flag_list(s, "truncated_lower", dim);
  auto tu = flag_list(s, "truncated_upper", dim);
  std::vector<double> lower(dim), upper(dim);
  std::vector<bool> trunc_lo(dim), trunc_hi(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    lower[i] = lo[i].value_or(def.lower()[i]);
    upper[i] = hi[i].value_or(def.upper()[i]);
    trunc_lo[i] = tl[i].value_or(!lo[i] && def.truncated_lower(i));
    trunc_hi[i] = tu[i].value_or(!hi[i] && def.truncated_upper(i));
    if (!(lower[i] <= upper[i])) s.fail("lower bound exceeds upper bound in coordinate " + std::to_string(i));
  }
  if (!spec.family->valid_params(lower) || !spec.family->valid_params(upper))
    s.fail("box " + ParamBox(lower, upper).to_string() + " leaves the parameter space of " + spec.family->id());
  spec.box = ParamBox(lower, upper, trunc_lo, trunc_hi);
  return spec;
}

std::vector<double> param_vector(const Section& s, const std::string& k, std::size_t dim) {
  auto v = s.reals(k);
  if (v.size() != dim) throw ConfigError(s.path_of(k) + ": expected " + std::to_string(dim) + " values");
  return v;
}

// ------------------------------------------------------- gaussian joint model

GaussianJointModel parse_gaussian_joint(const Section& s) {
  GaussianJointModel m;
  const json& sig = s.raw("sigma");
  if (!sig.is_array() || sig.size() != 3) throw ConfigError(s.path_of("sigma") + ": expected a 3x3 array");
  for (int i = 0; i < 3; ++i) {
    if (!sig[i].is_array() || sig[i].size() != 3) throw ConfigError(s.path_of("sigma") + ": expected a 3x3 array");
    for (int k = 0; k < 3; ++k) m.sigma(i, k) = Section::as_real(sig[i][k], s.path_of("sigma"));
  }
  if (!m.sigma.isApprox(m.sigma.transpose(), 1e-12)) throw ConfigError(s.path_of("sigma") + ": not symmetric");
  if (Eigen::LLT<Eigen::Matrix3d>(m.sigma).info() != Eigen::Success)
    throw ConfigError(s.path_of("sigma") + ": not positive definite");
  auto b0 = param_vector(s, "beta0", 2);
  m.beta0 = Eigen::Vector2d(b0[0], b0[1]);
  m.offset_b = s.real("b", 0.0);
  return m;
}

TiltConfig tilt_config(const Section& s, const Context& ctx) {
  TiltConfig c;
  c.theta_grid = s.count("theta_grid", c.theta_grid, 2);
  c.gamma_grid = s.count("gamma_grid", c.gamma_grid, 2);
  c.theta_starts = s.count("theta_starts", c.theta_starts, 1);
  c.gamma_perturbations = s.count("gamma_perturbations", c.gamma_perturbations);
  c.lambda_tol = s.real("lambda_tol", c.lambda_tol);
  c.xtol = s.real("xtol", c.xtol);
  c.threads = ctx.threads;
  c.seed = ctx.seed;
  c.quad = quad_options(s);
  return c;
}

GaussianJointConfig joint_config(const Section& s, const Context& ctx) {
  GaussianJointConfig c;
  c.box_half_width = s.real("box_half_width", c.box_half_width);
  if (!(c.box_half_width > 0.0)) throw ConfigError(s.path_of("box_half_width") + ": must be positive");
  c.tilt = tilt_config(s, ctx);
  return c;
}

const std::vector<std::string> kTiltKeys = {"theta_grid", "gamma_grid", "theta_starts", "gamma_perturbations",
                                            "lambda_tol", "xtol", "quad_tolerance"};

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Results are computed once and serialized at both precisions.
using Render = std::function<std::string(io::Precision)>;

Artifact make_artifact(std::string suffix, std::string ext, const Render& render) {
  return {std::move(suffix), std::move(ext), render({false}), render({true})};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ------------------------------------------------------------------ index

CommandOutput cmd_index(const json& cfg, const Context& ctx, io::Provenance prov) {
  Section s(cfg, "index", with_common({"null", "alternative", "families", "grid_points", "refine_starts",
                                       "check_separation", "boundary_warning", "xtol", "quad_tolerance"}));
  IndexConfig ic;
  ic.grid_points = s.count("grid_points", ic.grid_points, 2);
  ic.refine_starts = s.count("refine_starts", ic.refine_starts, 1);
  ic.check_separation = s.flag("check_separation", ic.check_separation);
  ic.boundary_warning = s.real("boundary_warning", ic.boundary_warning);
  ic.xtol = s.real("xtol", ic.xtol);
  ic.threads = ctx.threads;
  ic.quad = quad_options(s);

  CommandOutput out;
  out.provenance = prov;
  if (s.has("families")) {
    if (s.has("null") || s.has("alternative")) s.fail("'families' cannot be combined with 'null'/'alternative'");
    const json& arr = s.raw("families");
    if (!arr.is_array() || arr.size() < 2) throw ConfigError(s.path_of("families") + ": expected at least two entries");
    std::vector<FamilyEntry> entries;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      auto f = parse_family(arr[i], s.path_of("families") + "[" + std::to_string(i) + "]");
      entries.push_back({f.family, f.box, f.label});
    }
    const auto r = multi_family_rate(entries, ic);
    auto render = [=](io::Precision p) {
      json j = io::to_json(r, p);
      json labels = json::array();
      for (const auto& e : entries) labels.push_back(e.label);
      j["mode"] = "multi-family";
      j["labels"] = labels;
      j["provenance"] = io::to_json(prov);
      return j;
    };
    out.result = render({true});
    out.artifacts.push_back(make_artifact("", "json", [=](io::Precision p) { return dump(render(p)); }));
    return out;
  }

  const auto g = parse_family(s.raw("null"), s.path_of("null"));
  const auto h = parse_family(s.raw("alternative"), s.path_of("alternative"));
  const bool points = g.box.is_point() && h.box.is_point();
  const ChernoffResult r = points ? pairwise_index(g.family, g.box.lower(), h.family, h.box.lower(), ic.quad)
                                  : generalized_index(g.family, g.box, h.family, h.box, ic);
  auto render = [=](io::Precision p) {
    json j = io::to_json(r, p);
    j["mode"] = points ? "pairwise" : "generalized";
    j["null"] = {{"family", g.family->id()}, {"box", g.box.to_string()}};
    j["alternative"] = {{"family", h.family->id()}, {"box", h.box.to_string()}};
    j["provenance"] = io::to_json(prov);
    return j;
  };
  out.result = render({true});
  out.artifacts.push_back(make_artifact("", "json", [=](io::Precision p) { return dump(render(p)); }));
  return out;
}

// ---------------------------------------------------------------- contour

std::vector<double> parse_axis(const Section& s, const std::string& k, const FamilySpec& f) {
  if (f.family->dim() != 1) s.fail("contour grids need one-parameter families (" + f.family->id() + " has " +
                                   std::to_string(f.family->dim()) + ")");
  const bool log_default = f.family->log_scale()[0];
  if (!s.has(k)) return make_axis(f.box.lower()[0], f.box.upper()[0], f.box.is_point() ? 1 : 41, log_default);
  const json& v = s.raw(k);
  std::vector<double> axis;
  if (v.is_array()) {
    axis = s.reals(k);
  } else {
    Section a(v, s.path_of(k), {"lower", "upper", "points", "log"});
    const double lo = a.real("lower", f.box.lower()[0]);
    const double hi = a.real("upper", f.box.upper()[0]);
    if (!(lo <= hi)) a.fail("lower exceeds upper");
    const std::size_t n = a.count("points", 41, 1);
    axis = n == 1 ? std::vector<double>{lo} : make_axis(lo, hi, n, a.flag("log", log_default));
  }
  if (axis.empty()) throw ConfigError(s.path_of(k) + ": empty axis");
  for (double x : axis)
    if (!f.family->valid_params(std::vector<double>{x}))
      throw ConfigError(s.path_of(k) + ": value " + io::format_number(x, {true}) + " outside the parameter space of " +
                        f.family->id());
  return axis;
}

CommandOutput cmd_contour(const json& cfg, const Context& ctx, io::Provenance prov) {
  Section s(cfg, "contour", with_common({"null", "alternative", "theta_axis", "gamma_axis", "quad_tolerance"}));
  const auto g = parse_family(s.raw("null"), s.path_of("null"));
  const auto h = parse_family(s.raw("alternative"), s.path_of("alternative"));
  const auto ta = parse_axis(s, "theta_axis", g);
  const auto ga = parse_axis(s, "gamma_axis", h);
  const RateGrid grid = contour_grid(g.family, h.family, ta, ga, ctx.threads, quad_options(s));
  CommandOutput out;
  out.provenance = prov;
  double best = std::numeric_limits<double>::infinity();
  std::size_t missing = 0;
  for (const auto& row : grid.rho)
    for (double v : row) {
      if (std::isnan(v)) ++missing;
      else best = std::min(best, v);
    }
  out.result = {{"rows", grid.theta_axis.size()}, {"columns", grid.gamma_axis.size()},
                {"min_rho", best}, {"missing_cells", missing}};
  out.artifacts.push_back(make_artifact("", "csv", [=](io::Precision p) {
    std::ostringstream os;
    io::write_rate_grid_csv(os, grid, prov, p);
    return os.str();
  }));
  return out;
}

// ----------------------------------------------------------------- nonsep

CommandOutput cmd_nonsep(const json& cfg, const Context& ctx, io::Provenance prov) {
  const std::string model = cfg.is_object() && cfg.contains("model") && cfg["model"].is_string()
                                ? cfg["model"].get<std::string>()
                                : "families";
  CommandOutput out;
  out.provenance = prov;
  if (model == "gaussian-joint") {
    Section s(cfg, "nonsep", with_common(join({"model", "sigma", "beta0", "b", "box_half_width", "euler_tolerance"}, kTiltKeys)));
    const auto m = parse_gaussian_joint(s);
    const auto cfgj = joint_config(s, ctx);
    const double tol = s.real("euler_tolerance", 1e-4);
    const auto saddle = gaussian_joint_saddle(m, cfgj);
    const auto euler = gaussian_joint_euler(m, saddle, tol);
    auto render = [=](io::Precision p) {
      json j = io::to_json(saddle, p);
      j["model"] = "gaussian-joint";
      j["theta0"] = io::numbers(m.beta0, p);
      j["b"] = io::number(m.offset_b, p);
      j["euler"] = io::to_json(euler, p);
      j["provenance"] = io::to_json(prov);
      return j;
    };
    out.result = render({true});
    out.artifacts.push_back(make_artifact("", "json", [=](io::Precision p) { return dump(render(p)); }));
    return out;
  }
  if (model != "families") throw ConfigError("nonsep.model: '" + model + "' is not one of families, gaussian-joint");

  Section s(cfg, "nonsep", with_common(join({"model", "null", "alternative", "theta0", "b", "euler_tolerance"}, kTiltKeys)));
  const auto g = parse_family(s.raw("null"), s.path_of("null"));
  const auto h = parse_family(s.raw("alternative"), s.path_of("alternative"));
  const auto theta0 = param_vector(s, "theta0", g.family->dim());
  if (!g.box.contains(theta0, 1e-12)) throw ConfigError(s.path_of("theta0") + ": outside the null box " + g.box.to_string());
  const double b = s.real("b", 0.0);
  const double tol = s.real("euler_tolerance", 1e-4);
  const TiltConfig tc = tilt_config(s, ctx);
  const auto feas = feasibility_b(g.family, theta0, h.family, h.box, b, 41, tc.quad);
  if (!feas.feasible)
    throw ConfigError("nonsep.b: threshold " + io::format_number(b, {true}) +
                      " does not exceed sup_gamma E log(h/g) = " + io::format_number(feas.sup_expected_log_ratio, {true}));
  const auto tilt = solve_tilt(g.family, h.family, g.box, h.box, theta0, b, tc);
  const auto euler = euler_check(tilt, g.box, h.box, tol, tc.quad);
  auto render = [=](io::Precision p) {
    json j = io::to_json(tilt, p);
    j["feasibility"] = io::to_json(feas, p);
    j["euler"] = io::to_json(euler, p);
    j["provenance"] = io::to_json(prov);
    return j;
  };
  out.result = render({true});
  out.artifacts.push_back(make_artifact("", "json", [=](io::Precision p) { return dump(render(p)); }));
  return out;
}

// -------------------------------------------------------------------- glm

Eigen::MatrixXd parse_matrix(const Section& s, const std::string& k) {
  const json& v = s.raw(k);
  if (!v.is_array() || v.empty()) throw ConfigError(s.path_of(k) + ": expected a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) throw ConfigError(s.path_of(k) + ": rows must be non-empty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(s.path_of(k) + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = Section::as_real(v[i][c], s.path_of(k));
  }
  return m;
}

GlmDesign parse_design(const json& j, const std::string& where, const Context& ctx) {
  Section s(j, where, {"csv", "sidecar", "X", "Z", "beta0", "cumulant"});
  if (s.has("csv")) {
    if (s.has("X") || s.has("Z") || s.has("beta0") || s.has("cumulant"))
      s.fail("'csv' designs take beta0 and cumulant from the sidecar");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return (path.is_absolute() ? path : ctx.base_dir / path).string();
    };
    const std::string csv = resolve(s.text("csv"));
    std::string sidecar;
    if (s.has("sidecar")) {
      sidecar = resolve(s.text("sidecar"));
    } else {
      sidecar = std::filesystem::path(csv).replace_extension(".json").string();
    }
    return load_design(csv, sidecar);
  }
  if (s.has("sidecar")) s.fail("'sidecar' needs 'csv'");
  GlmDesign d;
  d.X = parse_matrix(s, "X");
  d.Z = parse_matrix(s, "Z");
  if (d.X.rows() != d.Z.rows()) s.fail("X and Z have different row counts");
  auto b0 = param_vector(s, "beta0", static_cast<std::size_t>(d.X.cols()));
  d.beta0 = Eigen::Map<Eigen::VectorXd>(b0.data(), static_cast<Eigen::Index>(b0.size()));
  try {
    d.cumulant = parse_cumulant(s.text("cumulant", "gaussian"));
  } catch (const ParameterError& e) {
    throw ConfigError(s.path_of("cumulant") + ": " + e.what());
  }
  return d;
}

GlmRateConfig glm_config(const Section& s, const Context& ctx) {
  GlmRateConfig c;
  c.gamma_starts = s.count("gamma_starts", c.gamma_starts, 1);
  c.beta_starts = s.count("beta_starts", c.beta_starts, 1);
  c.xtol = s.real("xtol", c.xtol);
  c.seed = ctx.seed;
  return c;
}

// Covariate rows (X1, X2, Z1) ~ N(0, sigma); null design (X1, X2), alternative (X1, Z1).
GlmDesign joint_fixed_design(const GaussianJointModel& m, std::size_t rows, std::uint64_t seed) {
  const Eigen::Matrix3d L = Eigen::LLT<Eigen::Matrix3d>(m.sigma).matrixL();
  GlmDesign d;
  d.X.resize(static_cast<Eigen::Index>(rows), 2);
  d.Z.resize(static_cast<Eigen::Index>(rows), 2);
  CounterRng rng(seed, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    Eigen::Vector3d e(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d w = L * e;
    const auto r = static_cast<Eigen::Index>(i);
    d.X(r, 0) = w[0];
    d.X(r, 1) = w[1];
    d.Z(r, 0) = w[0];
    d.Z(r, 1) = w[2];
  }
  d.beta0 = m.beta0;
  d.cumulant = Cumulant::gaussian;
  return d;
}

CommandOutput cmd_glm(const json& cfg, const Context& ctx, io::Provenance prov) {
  const std::string model = cfg.is_object() && cfg.contains("model") && cfg["model"].is_string()
                                ? cfg["model"].get<std::string>()
                                : "design";
  CommandOutput out;
  out.provenance = prov;
  if (model == "gaussian-joint") {
    Section s(cfg, "glm", with_common(join({"model", "sigma", "beta0", "b", "box_half_width", "fixed_design_rows",
                                            "gamma_starts", "beta_starts"},
                                           kTiltKeys)));
    const auto m = parse_gaussian_joint(s);
    const auto saddle = gaussian_joint_saddle(m, joint_config(s, ctx));
    std::optional<GlmRate> fixed;
    std::optional<DesignCheck> check;
    if (s.has("fixed_design_rows")) {
      if (m.offset_b != 0.0) s.fail("fixed-design rates use the unit threshold (b = 0)");
      const auto rows = s.count("fixed_design_rows", 0, 3);
      const auto d = joint_fixed_design(m, rows, ctx.seed);
      check = check_design(d);
      fixed = glm_rate(d, glm_config(s, ctx));
    }
    auto render = [=](io::Precision p) {
      json j = io::to_json(saddle, p);
      j["model"] = "gaussian-joint";
      j["rho"] = io::number(saddle.rate, p);
      j["beta0"] = io::numbers(m.beta0, p);
      j["b"] = io::number(m.offset_b, p);
      if (fixed) {
        json f = io::to_json(*fixed, p);
        f["rows"] = s.count("fixed_design_rows", 0);
        f["design_check"] = io::to_json(*check, p);
        j["fixed_design"] = f;
      }
      j["provenance"] = io::to_json(prov);
      return j;
    };
    out.result = render({true});
    out.artifacts.push_back(make_artifact("", "json", [=](io::Precision p) { return dump(render(p)); }));
    return out;
  }
  if (model != "design") throw ConfigError("glm.model: '" + model + "' is not one of design, gaussian-joint");
  Section s(cfg, "glm", with_common({"model", "design", "gamma_starts", "beta_starts", "xtol"}));
  const GlmDesign d = parse_design(s.raw("design"), s.path_of("design"), ctx);
  const DesignCheck check = check_design(d);
  const GlmRate r = glm_rate(d, glm_config(s, ctx));
  auto render = [=](io::Precision p) {
    json j = io::to_json(r, p);
    j["model"] = "design";
    j["cumulant"] = to_string(d.cumulant);
    j["rows"] = d.n();
    j["design_check"] = io::to_json(check, p);
    j["provenance"] = io::to_json(prov);
    return j;
  };
  out.result = render({true});
  out.artifacts.push_back(make_artifact("", "json", [=](io::Precision p) { return dump(render(p)); }));
  return out;
}

// --------------------------------------------------------------- simulate

std::vector<std::size_t> parse_n_list(const Section& s) {
  const json& v = s.raw("n_list");
  std::vector<std::size_t> ns;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() < 1)
        throw ConfigError(s.path_of("n_list") + ": expected positive integers");
      ns.push_back(v[i].get<std::size_t>());
    }
  } else {
    Section r(v, s.path_of("n_list"), {"from", "to", "step"});
    const auto from = r.count("from", 0, 1), to = r.count("to", 0, 1), step = r.count("step", 1, 1);
    if (!r.has("from") || !r.has("to")) r.fail("needs 'from' and 'to'");
    if (to < from) r.fail("'to' is below 'from'");
    for (std::size_t n = from; n <= to; n += step) ns.push_back(n);
  }
  if (ns.size() < 2) throw ConfigError(s.path_of("n_list") + ": need at least two sample sizes");
  if (!std::is_sorted(ns.begin(), ns.end()) || std::adjacent_find(ns.begin(), ns.end()) != ns.end())
    throw ConfigError(s.path_of("n_list") + ": sample sizes must be strictly increasing");
  return ns;
}

CommandOutput cmd_simulate(const json& cfg, const Context& ctx, io::Provenance prov) {
  const std::string scenario = cfg.is_object() && cfg.contains("scenario") && cfg["scenario"].is_string()
                                   ? cfg["scenario"].get<std::string>()
                                   : "iid";
  const std::vector<std::string> mc_keys = {"scenario", "n_list", "method", "reps", "target_rel_err", "pilot_reps",
                                            "max_reps", "ess_floor", "b"};
  std::vector<std::string> keys;
  if (scenario == "iid") {
    keys = join(mc_keys, {"null", "alternative", "side", "tilt", "theta0", "grid_points", "quad_tolerance"});
    keys = join(keys, {"theta_grid", "gamma_grid", "theta_starts", "gamma_perturbations", "lambda_tol", "xtol"});
  } else if (scenario == "gaussian-joint") {
    keys = join(join(mc_keys, {"sigma", "beta0", "box_half_width"}), kTiltKeys);
  } else {
    throw ConfigError("simulate.scenario: '" + scenario + "' is not one of iid, gaussian-joint");
  }
  Section s(cfg, "simulate", with_common(keys));
  const auto ns = parse_n_list(s);
  const Method method = s.choice("method", {"tilted", "direct"}) == "tilted" ? Method::tilted : Method::direct;
  McConfig mc;
  mc.threads = ctx.threads;
  mc.target_rel_err = s.real("target_rel_err", mc.target_rel_err);
  mc.pilot_reps = s.count("pilot_reps", mc.pilot_reps, 10);
  mc.max_reps = s.count("max_reps", mc.max_reps, 10);
  mc.ess_floor = s.real("ess_floor", mc.ess_floor);
  if (!(mc.target_rel_err > 0.0)) throw ConfigError(s.path_of("target_rel_err") + ": must be positive");
  if (mc.max_reps < mc.pilot_reps) throw ConfigError(s.path_of("max_reps") + ": below pilot_reps");
  std::optional<std::size_t> reps;
  if (s.has("reps")) reps = s.count("reps", 0, 1);

  std::unique_ptr<Scenario> sc;
  Side side = Side::type_I;
  double theory = std::numeric_limits<double>::quiet_NaN();
  json setup;
  if (scenario == "iid") {
    const auto g = parse_family(s.raw("null"), s.path_of("null"));
    const auto h = parse_family(s.raw("alternative"), s.path_of("alternative"));
    side = s.choice("side", {"type-I", "type-II"}) == "type-I" ? Side::type_I : Side::type_II;
    const std::string tilt_kind = s.choice("tilt", {"chernoff", "nonsep"});
    const double b = s.real("b", 0.0);
    IndexConfig ic;
    ic.grid_points = s.count("grid_points", ic.grid_points, 2);
    ic.threads = ctx.threads;
    ic.quad = quad_options(s);
    const ChernoffResult r = g.box.is_point() && h.box.is_point()
                                 ? pairwise_index(g.family, g.box.lower(), h.family, h.box.lower(), ic.quad)
                                 : generalized_index(g.family, g.box, h.family, h.box, ic);
    setup["theta_star"] = r.theta_star;
    setup["gamma_star"] = r.gamma_star;
    setup["rho"] = r.rho;
    if (tilt_kind == "chernoff") {
      if (b != 0.0) s.fail("the Chernoff tilt is for the unit threshold (b = 0); use tilt 'nonsep'");
      if (s.has("theta0")) s.fail("'theta0' applies to the nonsep tilt only");
      theory = r.rho;
      std::optional<TiltedMeasure> tm;
      if (method == Method::tilted)
        tm = side == Side::type_I ? chernoff_tilt(g.family, h.family, r) : chernoff_tilt_swapped(g.family, h.family, r);
      if (side == Side::type_I)
        sc = std::make_unique<IidScenario>(g.family, g.box, h.family, h.box, g.family, r.theta_star, side, b, tm);
      else
        sc = std::make_unique<IidScenario>(g.family, g.box, h.family, h.box, h.family, r.gamma_star, side, b, tm);
    } else {
      if (side != Side::type_I) s.fail("the nonsep tilt covers the type-I error only");
      const auto theta0 = s.has("theta0") ? param_vector(s, "theta0", g.family->dim()) : r.theta_star;
      if (!g.box.contains(theta0, 1e-12)) throw ConfigError(s.path_of("theta0") + ": outside the null box");
      std::optional<TiltedMeasure> tm;
      const TiltConfig tc = tilt_config(s, ctx);
      tm = solve_tilt(g.family, h.family, g.box, h.box, theta0, b, tc);
      theory = rate_nonsep(*tm);
      setup["theta0"] = theta0;
      sc = std::make_unique<IidScenario>(g.family, g.box, h.family, h.box, g.family, theta0, side, b,
                                         method == Method::tilted ? tm : std::nullopt);
    }
  } else {
    const auto m = parse_gaussian_joint(s);
    std::optional<GaussianJointSaddle> saddle = gaussian_joint_saddle(m, joint_config(s, ctx));
    theory = saddle->rate;
    setup["theta_dag"] = std::vector<double>{saddle->theta_dag[0], saddle->theta_dag[1]};
    setup["gamma_dag"] = std::vector<double>{saddle->gamma_dag[0], saddle->gamma_dag[1]};
    setup["lambda_dag"] = saddle->lambda_dag;
    sc = std::make_unique<GaussianJointScenario>(m, method == Method::tilted ? saddle : std::nullopt);
  }

  const DecayCurve curve = decay_curve(*sc, ns, method, ctx.seed, mc, reps, side);
  CommandOutput out;
  out.provenance = prov;
  auto fit_json = [=](io::Precision p) {
    json j = io::to_json(curve.fit, p);
    j["side"] = to_string(curve.side);
    j["method"] = to_string(method);
    j["scenario"] = scenario;
    j["theory_rate"] = io::number(theory, p);
    j["warnings"] = curve.warnings;
    j["provenance"] = io::to_json(prov);
    return j;
  };
  out.result = fit_json({true});
  out.result["setup"] = setup;
  json est = json::array();
  for (std::size_t i = 0; i < ns.size(); ++i) {
    json e = io::to_json(curve.estimates[i], {true});
    e["n"] = ns[i];
    est.push_back(e);
  }
  out.result["estimates"] = est;
  out.artifacts.push_back(make_artifact("", "csv", [=](io::Precision p) {
    std::ostringstream os;
    io::write_decay_csv(os, curve, prov, p);
    return os.str();
  }));
  out.artifacts.push_back(make_artifact(".fit", "json", [=](io::Precision p) { return dump(fit_json(p)); }));
  return out;
}

using CommandFn = CommandOutput (*)(const json&, const Context&, io::Provenance);

const std::vector<std::pair<std::string, CommandFn>>& commands() {
  static const std::vector<std::pair<std::string, CommandFn>> table = {
      {"index", cmd_index}, {"contour", cmd_contour}, {"nonsep", cmd_nonsep},
      {"glm", cmd_glm},     {"simulate", cmd_simulate}};
  return table;
}

const char* describe(const std::string& name) {
  if (name == "index") return "Generalized Chernoff index over two parameter boxes (JSON)";
  if (name == "contour") return "Pairwise index on a theta x gamma grid (CSV)";
  if (name == "nonsep") return "Non-separated exponent, tilted measure and Euler diagnostics (JSON)";
  if (name == "glm") return "GLM and joint Gaussian regression exponents (JSON)";
  return "Error-probability decay curve by direct or importance-sampled Monte Carlo (CSV + fit JSON)";
}

// Effective config: --seed folded in, threads dropped (they must not change
// results, so they must not change the hash either).
json effective_config(const json& config, const RunOptions& options) {
  json eff = config;
  if (eff.is_object()) {
    eff.erase("threads");
    eff.erase("output");
    if (options.seed) eff["seed"] = *options.seed;
  }
  return eff;
}

std::filesystem::path sibling(const std::filesystem::path& out, const Artifact& a, bool raw) {
  std::filesystem::path p = out;
  std::string stem = p.stem().string();
  const std::string ext = a.suffix.empty() && p.has_extension() ? p.extension().string() : "." + a.extension;
  return p.replace_filename(stem + a.suffix + (raw ? ".raw" : "") + ext);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  os << text;
  if (!os) throw ConfigError("failed writing " + p.string());
}

}  // namespace

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : commands()) out.push_back(name);
  return out;
}

json load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::uint64_t config_hash(const std::string& command, const json& config) {
  return io::fnv1a64(command + "\n" + effective_config(config, {}).dump());
}

CommandOutput run_command(const std::string& command, const json& config, const RunOptions& options) {
  const auto& table = commands();
  auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == command; });
  if (it == table.end()) throw ConfigError("unknown command '" + command + "'");
  if (!config.is_object()) throw ConfigError(command + ": config must be a JSON object");

  Context ctx;
  ctx.base_dir = options.base_dir;
  const json eff = effective_config(config, options);
  if (config.contains("seed") && !config["seed"].is_null()) {
    const json& v = config["seed"];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(command + ".seed: expected a non-negative integer");
    ctx.seed = v.get<std::uint64_t>();
  }
  if (options.seed) ctx.seed = *options.seed;
  if (config.contains("threads") && !config["threads"].is_null()) {
    const json& v = config["threads"];
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(command + ".threads: expected a positive integer");
    ctx.threads = v.get<std::size_t>();
  }
  if (options.threads) ctx.threads = *options.threads;
  if (ctx.threads == 0) throw ConfigError("threads must be positive");
  if (config.contains("output") && !config["output"].is_null() && !config["output"].is_string())
    throw ConfigError(command + ".output: expected a path string");

  io::Provenance prov;
  prov.command = command;
  prov.config_hash = config_hash(command, eff);
  prov.seed = ctx.seed;
  return it->second(config, ctx, prov);
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const OptimizationError& e) {
    err << "nonconvergence: " << e.what() << "\n";
    if (!e.incumbent().empty()) {
      err << "  best incumbent:";
      for (double x : e.incumbent()) err << ' ' << x;
      err << " (value " << e.incumbent_value() << ")\n";
    }
    return kNonconvergence;
  } catch (const DivergenceError& e) {
    err << "numeric error: " << e.what() << " [" << e.tail() << "]\n";
    return kNumericError;
  } catch (const Error& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Large-deviations error exponents for generalized likelihood ratio tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));

  std::string config_path, out_path;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool raw = false;
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts, thread_opts;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_path, "Output path (default: config 'output', else stdout)");
    seed_opts.push_back(sub->add_option("--seed", seed, "Seed (overrides the config)"));
    thread_opts.push_back(sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber));
    sub->add_flag("--raw", raw, "Full-precision output (written alongside as *.raw.* when --out is used)");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  std::string command;
  RunOptions options;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    command = subs[i]->get_name();
    if (seed_opts[i]->count()) options.seed = seed;
    if (thread_opts[i]->count()) options.threads = threads;
  }

  try {
    const std::filesystem::path cfg_path(config_path);
    const json config = load_config(cfg_path);
    options.base_dir = cfg_path.has_parent_path() ? cfg_path.parent_path() : std::filesystem::path(".");
    const CommandOutput result = run_command(command, config, options);

    std::filesystem::path out = out_path;
    if (out.empty() && config.contains("output") && config["output"].is_string()) {
      out = config["output"].get<std::string>();
      if (out.is_relative()) out = options.base_dir / out;
    }
    if (out.empty()) {
      for (const auto& a : result.artifacts) std::cout << (raw ? a.raw_text : a.text);
    } else {
      for (const auto& a : result.artifacts) {
        write_file(sibling(out, a, false), a.text);
        if (raw) write_file(sibling(out, a, true), a.raw_text);
      }
    }
    return kOk;
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
}

}  // namespace gci::cli
