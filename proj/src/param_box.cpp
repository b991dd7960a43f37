#include "gci/param_box.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gci/error.hpp"

namespace gci {

ParamBox::ParamBox(std::vector<double> lower, std::vector<double> upper,
                   std::vector<bool> truncated_lower,
                   std::vector<bool> truncated_upper)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      truncated_lower_(std::move(truncated_lower)),
      truncated_upper_(std::move(truncated_upper)) {
  if (lower_.size() != upper_.size() || lower_.empty()) {
    throw ParameterError("ParamBox: bound vectors must be nonempty and of equal length");
  }
  if (truncated_lower_.empty()) truncated_lower_.assign(lower_.size(), false);
  if (truncated_upper_.empty()) truncated_upper_.assign(lower_.size(), false);
  if (truncated_lower_.size() != lower_.size() ||
      truncated_upper_.size() != lower_.size()) {
    throw ParameterError("ParamBox: truncation flags must match dimension");
  }
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) ||
        lower_[i] > upper_[i]) {
      std::ostringstream os;
      os << "ParamBox: invalid bounds [" << lower_[i] << ", " << upper_[i]
         << "] in coordinate " << i;
      throw ParameterError(os.str());
    }
  }
}

ParamBox ParamBox::point(std::vector<double> p) {
  auto copy = p;
  return ParamBox(std::move(copy), std::move(p));
}

bool ParamBox::is_point() const noexcept { return free_dim() == 0; }

std::size_t ParamBox::free_dim() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < lower_.size(); ++i) n += lower_[i] < upper_[i];
  return n;
}

bool ParamBox::contains(std::span<const double> p, double tol) const {
  if (p.size() != dim()) return false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double slack = tol * std::max(1.0, std::abs(upper_[i] - lower_[i]));
    if (!(p[i] >= lower_[i] - slack && p[i] <= upper_[i] + slack)) return false;
  }
  return true;
}

std::vector<double> ParamBox::project(std::span<const double> p) const {
  std::vector<double> out(p.begin(), p.end());
  project_inplace(out);
  return out;
}

void ParamBox::project_inplace(std::span<double> p) const {
  if (p.size() != dim()) throw ParameterError("ParamBox::project: dimension mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower_[i], upper_[i]);
}

double ParamBox::relative_position(std::size_t i, double x, bool log_scale) const {
  if (pinned(i)) return 0.5;
  if (log_scale && lower_[i] > 0.0 && x > 0.0) {
    return (std::log(x) - std::log(lower_[i])) /
           (std::log(upper_[i]) - std::log(lower_[i]));
  }
  return (x - lower_[i]) / (upper_[i] - lower_[i]);
}

bool ParamBox::near_truncated_face(std::span<const double> p, double rel,
                                   const std::vector<bool>& log_scale) const {
  for (std::size_t i = 0; i < dim(); ++i) {
    if (pinned(i)) continue;
    const bool logs = i < log_scale.size() && log_scale[i];
    const double r = relative_position(i, p[i], logs);
    if (truncated_lower_[i] && r <= rel) return true;
    if (truncated_upper_[i] && r >= 1.0 - rel) return true;
  }
  return false;
}

std::string ParamBox::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (i) os << " x ";
    os << (truncated_lower_[i] ? "(" : "[") << lower_[i] << ", " << upper_[i]
       << (truncated_upper_[i] ? ")" : "]");
  }
  return os.str();
}

std::vector<double> make_axis(double lo, double hi, std::size_t points,
                              bool log_spacing) {
  if (points == 0) throw ParameterError("make_axis: need at least one point");
  if (points == 1 || lo == hi) return {points == 1 ? 0.5 * (lo + hi) : lo};
  std::vector<double> axis(points);
  const bool logs = log_spacing && lo > 0.0;
  const double a = logs ? std::log(lo) : lo;
  const double b = logs ? std::log(hi) : hi;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1);
    axis[k] = logs ? std::exp(t) : t;
  }
  axis.front() = lo;
  axis.back() = hi;
  return axis;
}

}  // namespace gci
