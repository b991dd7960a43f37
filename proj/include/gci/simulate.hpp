#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gci/chernoff.hpp"
#include "gci/glm.hpp"
#include "gci/nonsep.hpp"
#include "gci/tilted_sampler.hpp"

namespace gci {

enum class Method { direct, tilted };
enum class Side { type_I, type_II };

std::string to_string(Method m);
std::string to_string(Side s);

struct ISEstimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  double rel_err = 0.0;
  double ess = 0.0;
  std::size_t reps = 0;
  Method method = Method::direct;
  bool low_ess = false;
  /// Stopped at the replication cap before reaching the target accuracy.
  bool truncated = false;
  std::vector<std::string> warnings;
};

struct Replicate {
  bool event = false;
  /// log dP/dQ of the replicate (0 for direct sampling).
  double log_weight = 0.0;
};

/// A data-generating mechanism plus a test. `run` draws one replicate of
/// size n from the truth (tilted = false) or the change of measure and
/// reports whether the test errs.
class Scenario {
 public:
  virtual ~Scenario() = default;
  virtual bool has_tilt() const = 0;
  virtual Replicate run(std::size_t n, bool tilted, CounterRng& rng) const = 0;
};

/// log LR_n = sup_Gamma sum log h - sup_Theta sum log g, MLEs clipped to the boxes.
double glrt_statistic(std::span<const double> data, const FamilyModel& g, const ParamBox& theta_box,
                      const FamilyModel& h, const ParamBox& gamma_box);

/// i.i.d. observations from a single family member. Type I errs when
/// log LR_n > n b, type II when log LR_n <= n b.
class IidScenario final : public Scenario {
 public:
  IidScenario(FamilyPtr g, ParamBox theta_box, FamilyPtr h, ParamBox gamma_box, FamilyPtr truth,
              std::vector<double> truth_params, Side side, double b,
              std::optional<TiltedMeasure> tilt = std::nullopt);

  bool has_tilt() const override { return sampler_ != nullptr; }
  Replicate run(std::size_t n, bool tilted, CounterRng& rng) const override;

  const TiltedSampler* sampler() const { return sampler_.get(); }
  const std::optional<TiltedMeasure>& tilt() const { return tilt_; }

 private:
  FamilyPtr g_, h_, truth_;
  ParamBox theta_box_, gamma_box_;
  std::vector<double> truth_params_;
  Side side_;
  double b_;
  std::optional<TiltedMeasure> tilt_;
  std::shared_ptr<const TiltedSampler> sampler_;
};

/// Joint Gaussian regression: errs when RSS0 - RSS1 > 2 n b.
class GaussianJointScenario final : public Scenario {
 public:
  GaussianJointScenario(GaussianJointModel model, std::optional<GaussianJointSaddle> saddle);
  bool has_tilt() const override { return saddle_.has_value(); }
  Replicate run(std::size_t n, bool tilted, CounterRng& rng) const override;
  /// Probability of drawing a whole tilted replicate from the truth instead.
  /// Nonzero only when E_Q[w^2] is infinite, i.e. C^-1 + 2 lambda A is not
  /// positive definite; the mixture caps every weight at 1/alpha.
  double defensive_share() const noexcept { return alpha_; }

  static constexpr double kDefensiveShare = 0.1;

 private:
  GaussianJointModel model_;
  std::optional<GaussianJointSaddle> saddle_;
  Eigen::Matrix4d chol_truth_;
  Eigen::Matrix4d chol_tilt_;
  Eigen::Matrix4d A_;
  double alpha_ = 0.0;
};

/// Fixed-design GLM: errs when LR_n >= 1. The sample size is the number of
/// design rows.
class GlmScenario final : public Scenario {
 public:
  GlmScenario(GlmDesign design, std::optional<GlmRate> tilt);
  bool has_tilt() const override { return tilt_.has_value(); }
  Replicate run(std::size_t n, bool tilted, CounterRng& rng) const override;

 private:
  GlmDesign design_;
  std::optional<GlmRate> tilt_;
  Eigen::VectorXd eta0_, eta_tilt_, diff_;
};

struct McConfig {
  std::size_t threads = 1;
  double target_rel_err = 0.1;
  std::size_t pilot_reps = 2000;
  std::size_t max_reps = 10'000'000;
  double ess_floor = 50.0;
};

ISEstimate direct_mc(const Scenario& s, std::size_t n, std::size_t reps, std::uint64_t seed,
                     const McConfig& config = {});
ISEstimate is_mc(const Scenario& s, std::size_t n, std::size_t reps, std::uint64_t seed,
                 const McConfig& config = {});
/// Pilot run, then extension (same streams continued) until rel_err meets the
/// target or the replication cap is reached.
ISEstimate adaptive_mc(const Scenario& s, std::size_t n, Method method, std::uint64_t seed,
                       const McConfig& config = {});

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  std::size_t points_used = 0;
};

/// Least squares of log p_hat on n over positive estimates.
LineFit fit_log_linear(const std::vector<std::size_t>& n, const std::vector<ISEstimate>& est);

struct DecayCurve {
  std::vector<std::size_t> sample_sizes;
  std::vector<ISEstimate> estimates;
  LineFit fit;
  Side side = Side::type_I;
  std::vector<std::string> warnings;
};

/// Throws NumericError when fewer than two estimates are positive.
DecayCurve decay_curve(const Scenario& s, const std::vector<std::size_t>& n_list, Method method,
                       std::uint64_t seed, const McConfig& config = {},
                       std::optional<std::size_t> fixed_reps = std::nullopt, Side side = Side::type_I);

/// Type-I tilt at the least-favourable pair: base g_{theta*}, lambda = z*.
TiltedMeasure chernoff_tilt(const FamilyPtr& g, const FamilyPtr& h, const ChernoffResult& saddle);
/// Type-II tilt: base h_{gamma*}, roles swapped, lambda = 1 - z*.
TiltedMeasure chernoff_tilt_swapped(const FamilyPtr& g, const FamilyPtr& h, const ChernoffResult& saddle);

struct ErrorProbe {
  ISEstimate type_I;
  ISEstimate type_II;
};

/// Both error probabilities at the least-favourable pair with threshold 0.
ErrorProbe max_error_probe(const FamilyPtr& g, const ParamBox& theta_box, const FamilyPtr& h,
                           const ParamBox& gamma_box, const ChernoffResult& saddle, std::size_t n,
                           std::size_t reps, std::uint64_t seed, const McConfig& config = {});

}  // namespace gci
