#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace prodmed {

/// Philox4x32-10 counter-based block function.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::string_view name = "philox4x32-10";

  [[nodiscard]] static Counter block(Counter counter, Key key) noexcept;
};

/// Stream families; the tag occupies the top 16 bits of the stream id so that
/// replication indices never collide across purposes.
enum class StreamPurpose : std::uint16_t {
  data = 1,
  outliers = 2,
  bootstrap = 3,
  reference = 4,
  perturbation = 5,
  selftest = 6,
};

[[nodiscard]] constexpr std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
  return (static_cast<std::uint64_t>(purpose) << 48) | (index & 0xFFFFFFFFFFFFull);
}

/// Sequential draws from one Philox stream. The key is the 64-bit seed, counter words
/// 0-1 hold the block index and words 2-3 the stream id, so any (seed, stream) pair
/// yields the same sequence on every platform and thread schedule.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index)
      : RandomStream(seed, stream_id(purpose, index)) {}

  [[nodiscard]] std::uint32_t next_u32();
  [[nodiscard]] std::uint64_t next_u64();
  /// Uniform on the open interval (0,1) with 53-bit resolution.
  [[nodiscard]] double uniform();
  /// Standard normal via the Box-Muller transform.
  [[nodiscard]] double normal();
  [[nodiscard]] Eigen::VectorXd normal_vector(Eigen::Index d);
  /// Uniform integer in [0, n) without modulo bias.
  [[nodiscard]] std::size_t uniform_index(std::size_t n);

 private:
  void refill();

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace prodmed
