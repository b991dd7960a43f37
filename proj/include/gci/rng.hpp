#pragma once

#include <array>
#include <cstdint>

namespace gci {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Pure function of
/// (counter, key).
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Counter-based random stream. The key is the user seed; the counter holds
/// a 64-bit stream id (e.g. replication index) and a 64-bit draw index, so
/// the n-th value of stream s is the same no matter which thread asks for it
/// or in what order streams are visited.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double normal() noexcept;
  double exponential() noexcept;

  /// Restart the stream at draw block `block` (each block yields four u32).
  void seek(std::uint64_t block) noexcept;

 private:
  void refill() noexcept;

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
};

}  // namespace gci
