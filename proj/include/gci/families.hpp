#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gci/param_box.hpp"
#include "gci/quadrature.hpp"
#include "gci/rng.hpp"

namespace gci {

enum class SupportKind { continuous, lattice };

/// Continuous supports are integrated in a coordinate s with x = x(s):
/// identity for the real line, s = log x for the positive half-line.
enum class Coordinate { identity, log };

struct Support {
  SupportKind kind = SupportKind::continuous;
  /// Open interval (lower, upper) for continuous supports; inclusive integer
  /// range for lattices (upper may be +inf).
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double x) const noexcept;
  bool same_as(const Support& other) const noexcept;
};

/// A parametric family {f_p : p in box}. Concrete families override the
/// density, sampler, and (when available) the closed-form MLE and score.
class FamilyModel {
 public:
  virtual ~FamilyModel() = default;

  const std::string& id() const noexcept { return id_; }
  /// Compact parameter box used when the caller does not supply one.
  const ParamBox& space() const noexcept { return space_; }
  const Support& support() const noexcept { return support_; }
  std::size_t dim() const noexcept { return space_.dim(); }
  Coordinate coordinate() const noexcept { return coordinate_; }
  /// Whether parameter coordinate i is a positive scale (grids log-spaced).
  const std::vector<bool>& log_scale() const noexcept { return log_scale_; }

  /// Checked log-density. Throws ParameterError / DomainError.
  double log_density(std::span<const double> params, double x) const;
  virtual double log_density_unchecked(std::span<const double> params, double x) const = 0;

  /// Log-density of x at x = x(s), for continuous supports. Families
  /// override this when log f can be formed without materialising x (the
  /// log coordinate reaches s = +-700).
  virtual double log_density_coord(std::span<const double> params, double s) const;
  /// log |dx/ds|.
  double log_jacobian(double s) const noexcept;
  double to_observation(double s) const noexcept;
  double to_coordinate(double x) const noexcept;

  /// Centre and spread of f_p in the integration coordinate; seeds the tail
  /// scan of the integrator.
  virtual std::pair<double, double> coordinate_hint(std::span<const double> params) const = 0;

  virtual bool valid_params(std::span<const double> params) const = 0;
  void check_params(std::span<const double> params) const;

  /// Gradient of log f_p(x) with respect to p. Default: central differences.
  virtual void score(std::span<const double> params, double x, std::span<double> out) const;

  virtual double mean(std::span<const double> params) const = 0;
  virtual double variance(std::span<const double> params) const = 0;

  /// One draw. Consumes a fixed number of uniforms per draw for continuous
  /// families; lattice samplers use inversion.
  virtual double draw(std::span<const double> params, CounterRng& rng) const = 0;
  std::vector<double> sample(std::span<const double> params, std::size_t count,
                             std::uint64_t seed, std::uint64_t stream = 0) const;

  /// Unconstrained closed-form maximiser of the log-likelihood, if any.
  virtual std::optional<std::vector<double>> closed_form_mle(std::span<const double> data) const;

  /// MLE over `box` (defaults to space()): closed form then clipping, or
  /// multistart simplex when no closed form exists.
  std::vector<double> mle(std::span<const double> data) const;
  std::vector<double> mle(std::span<const double> data, const ParamBox& box) const;
  std::vector<double> mle_numeric(std::span<const double> data, const ParamBox& box) const;

  double log_likelihood(std::span<const double> params, std::span<const double> data) const;

 protected:
  FamilyModel(std::string id, ParamBox space, Support support, Coordinate coord,
              std::vector<bool> log_scale);

 private:
  std::string id_;
  ParamBox space_;
  Support support_;
  Coordinate coordinate_;
  std::vector<bool> log_scale_;
};

using FamilyPtr = std::shared_ptr<const FamilyModel>;

/// Default truncation of (0, inf) parameter spaces.
inline constexpr double kDefaultPositiveLower = 0.01;
inline constexpr double kDefaultPositiveUpper = 50.0;

/// Lognormal with log X ~ N(0, theta); theta is the variance of log X.
FamilyPtr make_lognormal();
/// Exponential with mean gamma.
FamilyPtr make_exponential();
FamilyPtr make_poisson();
/// Geometric on {0,1,...} with P(x) = gamma^x / (1+gamma)^(x+1); gamma is the
/// failure-to-success odds (and the mean).
FamilyPtr make_geometric();
/// N(mu, 1), the intercept-only Gaussian linear model.
FamilyPtr make_gaussian();
FamilyPtr make_bernoulli();

/// Look up a family by its configuration id: "lognormal", "exponential",
/// "poisson", "geometric", "gaussian-linear" (alias "gaussian"),
/// "bernoulli". Throws ParameterError for unknown ids.
FamilyPtr make_family(std::string_view id);
std::vector<std::string> family_ids();

/// Density check: log of the total mass of f_p (0 for a proper density).
double log_total_mass(const FamilyModel& family, std::span<const double> params,
                      const quad::Options& opt = {});

/// Expected value of log g_theta(X) - log h_gamma(X) under X ~ g_theta.
double kl_divergence(const FamilyModel& g, std::span<const double> theta,
                     const FamilyModel& h, std::span<const double> gamma,
                     const quad::Options& opt = {});

struct SeparationReport {
  double min_kl = 0.0;
  std::vector<double> theta_argmin;
  std::vector<double> gamma_argmin;
  double threshold = 0.0;
  bool separated = false;
};

struct SeparationConfig {
  std::size_t grid_points = 21;
  double threshold = 1e-6;
  quad::Options quad{};
};

/// Numerical minimum of KL(g_theta || h_gamma) over the two boxes: grid scan
/// followed by simplex refinement from the best cell.
SeparationReport check_separation(const FamilyModel& g, const ParamBox& theta_box,
                                  const FamilyModel& h, const ParamBox& gamma_box,
                                  const SeparationConfig& config = {});

}  // namespace gci

namespace gci {

/// Integrate a callback over the support of `base`. The callback receives
/// the observation x and its integration coordinate s and returns the
/// log-weight (density with respect to dx, or counting measure) plus N
/// auxiliary values.
template <std::size_t N, class F>
quad::LogMoments<N> integrate_support(const FamilyModel& base,
                                      std::span<const double> base_params, F&& f,
                                      const quad::Options& opt) {
  const Support& sup = base.support();
  if (sup.kind == SupportKind::lattice) {
    const long lo = static_cast<long>(sup.lower);
    const long hi = std::isfinite(sup.upper) ? static_cast<long>(sup.upper)
                                             : std::numeric_limits<long>::max();
    return quad::sum_lattice<N>([&](double k) { return f(k, k); }, lo, hi, opt);
  }
  auto [center, scale] = base.coordinate_hint(base_params);
  double lo_limit, hi_limit;
  if (base.coordinate() == Coordinate::log) {
    lo_limit = -700.0;
    hi_limit = 700.0;
  } else {
    lo_limit = std::isfinite(sup.lower) ? sup.lower : center - 1e6 * scale;
    hi_limit = std::isfinite(sup.upper) ? sup.upper : center + 1e6 * scale;
  }
  auto g = [&](double s) {
    quad::Point<N> p = f(base.to_observation(s), s);
    p.log_weight += base.log_jacobian(s);
    return p;
  };
  return quad::integrate_line<N>(g, center, scale, lo_limit, hi_limit, opt);
}

}  // namespace gci
