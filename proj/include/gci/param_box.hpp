#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gci {

/// Compact axis-aligned parameter box.
///
/// A face may be flagged as *truncated*: it is an artificial bound imposed to
/// make an unbounded parameter space compact, as opposed to a bound that is
/// part of the model (e.g. Poisson mean >= 1). Optimizers report when they end
/// up on or near a truncated face.
///
/// A coordinate with lower == upper is pinned; such a box is how singleton
/// hypotheses are expressed.
class ParamBox {
 public:
  ParamBox() = default;
  ParamBox(std::vector<double> lower, std::vector<double> upper,
           std::vector<bool> truncated_lower = {},
           std::vector<bool> truncated_upper = {});

  static ParamBox point(std::vector<double> p);

  std::size_t dim() const noexcept { return lower_.size(); }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  bool truncated_lower(std::size_t i) const { return truncated_lower_[i]; }
  bool truncated_upper(std::size_t i) const { return truncated_upper_[i]; }

  bool pinned(std::size_t i) const { return lower_[i] == upper_[i]; }
  bool is_point() const noexcept;
  std::size_t free_dim() const noexcept;

  bool contains(std::span<const double> p, double tol = 0.0) const;
  /// Coordinate-wise clipping.
  std::vector<double> project(std::span<const double> p) const;
  void project_inplace(std::span<double> p) const;

  /// True when some coordinate of `p` sits within `rel` (fraction of the
  /// coordinate's extent, measured on a log scale for positive boxes when
  /// `log_scale[i]` is set) of a truncated face.
  bool near_truncated_face(std::span<const double> p, double rel,
                           const std::vector<bool>& log_scale = {}) const;

  /// Box-relative position in [0, 1] of coordinate i.
  double relative_position(std::size_t i, double x, bool log_scale) const;

  std::string to_string() const;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<bool> truncated_lower_;
  std::vector<bool> truncated_upper_;
};

/// Evenly spaced axis; log-spaced when `log_spacing` is set and lo > 0.
std::vector<double> make_axis(double lo, double hi, std::size_t points,
                              bool log_spacing);

}  // namespace gci
