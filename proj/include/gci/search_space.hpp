#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gci/param_box.hpp"

namespace gci {

/// One or two parameter boxes concatenated into a single search vector.
/// Positive-scale coordinates are searched on log scale, so simplex steps and
/// grid spacing are relative there.
class SearchSpace {
 public:
  SearchSpace(const ParamBox& box, const std::vector<bool>& log_scale)
      : SearchSpace(box, log_scale, nullptr, {}) {}
  SearchSpace(const ParamBox& first, const std::vector<bool>& first_log, const ParamBox& second,
              const std::vector<bool>& second_log)
      : SearchSpace(first, first_log, &second, second_log) {}

  std::size_t dim() const noexcept { return lower_.size(); }
  const ParamBox& box() const noexcept { return box_; }
  const std::vector<bool>& log_axes() const noexcept { return logs_; }

  std::vector<double> to_search(std::span<const double> p) const {
    std::vector<double> y(p.begin(), p.end());
    for (std::size_t i = 0; i < y.size(); ++i)
      if (logs_[i]) y[i] = std::log(y[i]);
    return y;
  }
  std::vector<double> from_search(std::span<const double> y) const {
    std::vector<double> p(y.begin(), y.end());
    for (std::size_t i = 0; i < p.size(); ++i)
      if (logs_[i]) p[i] = std::exp(p[i]);
    box_.project_inplace(p);
    return p;
  }

  ParamBox search_box() const {
    std::vector<double> lo(dim()), hi(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      lo[i] = logs_[i] ? std::log(lower_[i]) : lower_[i];
      hi[i] = logs_[i] ? std::log(upper_[i]) : upper_[i];
      if (box_.pinned(i)) hi[i] = lo[i];
    }
    return ParamBox(lo, hi);
  }

  std::vector<double> axis(std::size_t i, std::size_t points) const {
    if (box_.pinned(i)) return {lower_[i]};
    return make_axis(lower_[i], upper_[i], points, logs_[i]);
  }

  /// Tensor grid, last coordinate varying fastest. Nodes come out in
  /// lexicographic order of the parameter vector.
  std::vector<std::vector<double>> grid_nodes(std::size_t points) const {
    std::vector<std::vector<double>> axes;
    std::size_t total = 1;
    for (std::size_t i = 0; i < dim(); ++i) {
      axes.push_back(axis(i, points));
      total *= axes.back().size();
    }
    std::vector<std::vector<double>> nodes(total, std::vector<double>(dim()));
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t r = k;
      for (std::size_t i = dim(); i-- > 0;) {
        nodes[k][i] = axes[i][r % axes[i].size()];
        r /= axes[i].size();
      }
    }
    return nodes;
  }

  /// Grid spacing in search coordinates; used as the initial simplex size.
  std::vector<double> grid_step(std::size_t points) const {
    const auto sb = search_box();
    std::vector<double> step(dim());
    const double cells = points > 1 ? static_cast<double>(points - 1) : 1.0;
    for (std::size_t i = 0; i < dim(); ++i) step[i] = (sb.upper()[i] - sb.lower()[i]) / cells;
    return step;
  }

 private:
  SearchSpace(const ParamBox& first, const std::vector<bool>& first_log, const ParamBox* second,
              const std::vector<bool>& second_log) {
    std::vector<bool> tl, tu;
    auto append = [&](const ParamBox& b, const std::vector<bool>& ls) {
      for (std::size_t i = 0; i < b.dim(); ++i) {
        lower_.push_back(b.lower()[i]);
        upper_.push_back(b.upper()[i]);
        tl.push_back(b.truncated_lower(i));
        tu.push_back(b.truncated_upper(i));
        logs_.push_back(i < ls.size() && ls[i] && b.lower()[i] > 0.0);
      }
    };
    append(first, first_log);
    if (second) append(*second, second_log);
    box_ = ParamBox(lower_, upper_, tl, tu);
  }

  std::vector<double> lower_, upper_;
  std::vector<bool> logs_;
  ParamBox box_;
};

}  // namespace gci
