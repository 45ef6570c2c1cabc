#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace promptseg {

/// Seed for an independent stream keyed by (global seed, sample id, purpose,
/// index). Streams for different samples never depend on processing order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view sample_id, std::string_view purpose,
                          std::uint64_t index = 0) noexcept;

/// Deterministic random stream. Bounded draws are computed here rather than
/// through std distributions so that sequences are identical across standard
/// library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Uniform integer in [lo, hi].
  int between(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace promptseg
