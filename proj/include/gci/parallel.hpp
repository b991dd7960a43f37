#pragma once

#include <cstddef>
#include <functional>

namespace gci {

/// Runs body(i) for i in [0, count) on up to `threads` workers using a
/// static block partition. Bodies must write only to their own slot; the
/// lowest-index exception (if any) is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace gci

#include <span>

namespace gci {

/// Sum by recursive halving; the grouping depends only on the length.
double pairwise_sum(std::span<const double> values) noexcept;

}  // namespace gci
