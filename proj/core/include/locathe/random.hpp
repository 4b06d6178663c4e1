#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "locathe/bytes.hpp"

namespace locathe {

/// Source of all randomness in the library. Implementations are NOT required to be
/// thread-safe; callers sharing one source across threads must serialize draws.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<uint8_t> out) = 0;

  Bytes bytes(std::size_t n);
  uint64_t next_u64();
  /// Uniform in [0, bound) by rejection; bound must be nonzero.
  uint64_t uniform(uint64_t bound);

  template <std::size_t N>
  std::array<uint8_t, N> array() {
    std::array<uint8_t, N> out{};
    fill(out);
    return out;
  }
};

/// Operating-system randomness through OpenSSL's RAND_bytes (thread-safe).
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<uint8_t> out) override;
};

/// Reproducible stream: block i = HMAC-SHA256(seed_key, label || i). Not thread-safe.
class DeterministicRandom final : public RandomSource {
 public:
  explicit DeterministicRandom(uint64_t seed);
  explicit DeterministicRandom(ByteView seed_key);

  void fill(std::span<uint8_t> out) override;

  /// Independent child stream; forks with distinct labels never overlap.
  DeterministicRandom fork(std::string_view label) const;

 private:
  Block32 key_{};
  uint64_t counter_ = 0;
  Block32 buffer_{};
  std::size_t buffered_ = 0;
};

}  // namespace locathe
