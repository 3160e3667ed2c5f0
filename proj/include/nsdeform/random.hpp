#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace nsdeform {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Output depends only on (key, counter), so streams are reproducible on
/// every platform.
class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);

  explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller; pairs are cached.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

private:
  void refill();

  Key key_{};
  Counter ctr_{};
  Counter buf_{};
  std::size_t pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<double> standard_normals(std::uint64_t seed, std::size_t n);

}  // namespace nsdeform
