#include "gci/mgf.hpp"

#include <cmath>

#include "gci/error.hpp"

namespace gci {

LogMgfSpec LogMgfSpec::pairwise(FamilyPtr g, std::vector<double> theta, FamilyPtr h,
                                std::vector<double> gamma) {
  LogMgfSpec s;
  s.gfam = std::move(g);
  s.hfam = std::move(h);
  s.base_params = theta;
  s.g_params = std::move(theta);
  s.h_params = std::move(gamma);
  return s;
}

void validate(const LogMgfSpec& spec) {
  if (!spec.gfam || !spec.hfam) throw ParameterError("log-MGF spec: missing family");
  const FamilyModel& base = spec.base();
  if (!spec.gfam->support().same_as(spec.hfam->support()) ||
      !base.support().same_as(spec.gfam->support())) {
    throw DomainError("log-MGF spec: families " + spec.gfam->id() + " and " + spec.hfam->id() +
                      " do not share a support");
  }
  base.check_params(spec.base_params);
  spec.gfam->check_params(spec.g_params);
  spec.hfam->check_params(spec.h_params);
  if (!std::isfinite(spec.offset_b)) throw ParameterError("log-MGF spec: offset b is not finite");
}

namespace {

// Moments of l and l^2 under the base law tilted by exp(lambda * l).
quad::LogMoments<2> tilted_moments(const LogMgfSpec& spec, double lambda) {
  const FamilyModel& base = spec.base();
  const FamilyModel& g = *spec.gfam;
  const FamilyModel& h = *spec.hfam;
  const bool continuous = base.support().kind == SupportKind::continuous;
  const double b = spec.offset_b;
  auto point = [&](double x, double s) {
    quad::Point<2> p;
    double lb, lg, lh;
    if (continuous) {
      lb = base.log_density_coord(spec.base_params, s);
      lg = g.log_density_coord(spec.g_params, s);
      lh = h.log_density_coord(spec.h_params, s);
    } else {
      lb = base.log_density_unchecked(spec.base_params, x);
      lg = g.log_density_unchecked(spec.g_params, x);
      lh = h.log_density_unchecked(spec.h_params, x);
    }
    const double l = (lh == lg ? 0.0 : lh - lg) - b;
    if (lb == -std::numeric_limits<double>::infinity()) return p;
    if (!std::isfinite(l)) {
      // Only reachable where one density underflows: the tilt decides the sign.
      p.log_weight = lambda == 0.0 ? lb : (lambda * l > 0 ? std::numeric_limits<double>::infinity()
                                                          : -std::numeric_limits<double>::infinity());
      return p;
    }
    // Far in a tail lb, lg, lh are huge and cancel; combine them without
    // forming lh - lg first.
    const double rest = lb == lg ? (1.0 - lambda) * lg : lb - lambda * lg;
    p.log_weight = rest + lambda * (lh - b);
    if (std::isnan(p.log_weight)) p.log_weight = lb + lambda * l;
    p.values = {l, l * l};
    return p;
  };
  return integrate_support<2>(base, spec.base_params, point, spec.quad);
}

}  // namespace

LogMgfValue log_mgf_all(const LogMgfSpec& spec, double lambda) {
  validate(spec);
  if (!std::isfinite(lambda)) throw ParameterError("log_mgf: lambda is not finite");
  const auto m = tilted_moments(spec, lambda);
  if (!std::isfinite(m.log_mass)) {
    throw DivergenceError("log_mgf: tilted mass is not finite", "interior");
  }
  LogMgfValue v;
  // The base law is normalised up to quadrature error; Lambda(0) is pinned.
  v.value = lambda == 0.0 ? 0.0 : m.log_mass;
  v.d1 = m.mean[0];
  v.d2 = std::max(0.0, m.mean[1] - m.mean[0] * m.mean[0]);
  return v;
}

double log_mgf(const LogMgfSpec& spec, double lambda) {
  if (lambda == 0.0) {
    validate(spec);
    return 0.0;
  }
  return log_mgf_all(spec, lambda).value;
}

double log_mgf_deriv(const LogMgfSpec& spec, double lambda, int order) {
  if (order != 1 && order != 2) throw ParameterError("log_mgf_deriv: order must be 1 or 2");
  const auto v = log_mgf_all(spec, lambda);
  return order == 1 ? v.d1 : v.d2;
}

double expected_log_ratio(const LogMgfSpec& spec) { return log_mgf_all(spec, 0.0).d1; }

}  // namespace gci
