#pragma once

#include <cstdint>
#include <vector>

#include "gci/nonsep.hpp"
#include "gci/rng.hpp"

namespace gci {

/// Walker/Vose alias table over a finite set of weights.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t size() const noexcept { return prob_.size(); }
  /// Maps one uniform on (0, 1) to an index.
  std::size_t pick(double u) const noexcept;

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

/// Exact sampler for Q-dagger of a TiltedMeasure on one-dimensional
/// families. Continuous supports: the integration coordinate is cut into
/// cells on which the log-density is linear to 1e-7, cell masses come from
/// Gauss-Kronrod, and draws invert the exponential-linear profile inside the
/// chosen cell. Lattices: alias table over the support truncated where the
/// tilted mass drops 60 nats below its peak.
class TiltedSampler {
 public:
  explicit TiltedSampler(const TiltedMeasure& tilt, const quad::Options& quad = {});

  /// Two uniforms per draw.
  double draw(CounterRng& rng) const;
  std::vector<double> sample(std::size_t count, std::uint64_t seed, std::uint64_t stream = 0) const;

  /// Normalised Q-dagger density (continuous: with respect to dx; lattice:
  /// probability mass).
  double log_density(double x) const;
  /// log h_{gamma+}(x) - log g_{theta+}(x) - b.
  double centered_log_ratio(double x) const;
  double log_normalizer() const noexcept { return log_norm_; }
  double cdf(double x) const;
  std::size_t cells() const noexcept { return continuous_ ? cell_lo_.size() : support_.size(); }

 private:
  double tilted_log_weight_coord(double s) const;
  double tilted_log_weight_lattice(double k) const;

  TiltedMeasure tilt_;
  bool continuous_ = true;
  double log_norm_ = 0.0;
  AliasTable alias_;
  // continuous cells in the integration coordinate
  std::vector<double> cell_lo_, cell_hi_, cell_flo_, cell_fhi_, cell_cum_;
  // lattice support starting at lattice_lo_
  std::size_t lattice_lo_ = 0;
  std::vector<double> support_;
  std::vector<double> lattice_cum_;
};

std::vector<double> tilted_sampler(const TiltedMeasure& tilt, std::size_t count, std::uint64_t seed);

}  // namespace gci
