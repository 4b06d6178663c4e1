#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace locathe {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

/// Fixed 32-octet value: prf outputs, nonces, derived secrets.
using Block32 = std::array<uint8_t, 32>;
/// SPIs, beacon ids and fetch handles.
using Octets8 = std::array<uint8_t, 8>;

inline ByteView view(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline Bytes to_bytes(ByteView b) { return Bytes(b.begin(), b.end()); }

template <std::size_t N>
Bytes to_bytes(const std::array<uint8_t, N>& a) {
  return Bytes(a.begin(), a.end());
}

inline void append(Bytes& out, ByteView data) { out.insert(out.end(), data.begin(), data.end()); }
inline void append(Bytes& out, std::string_view data) { append(out, view(data)); }
inline void append_u8(Bytes& out, uint8_t v) { out.push_back(v); }
void append_u16_be(Bytes& out, uint16_t v);
void append_u32_be(Bytes& out, uint32_t v);
void append_u64_be(Bytes& out, uint64_t v);

/// Concatenates any mix of byte containers.
template <typename... Parts>
Bytes concat(const Parts&... parts) {
  Bytes out;
  (append(out, ByteView(parts)), ...);
  return out;
}

/// Sequential big-endian reader over an octet string; throws Error(MalformedMessage) on underrun.
class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  ByteView take(std::size_t n);
  /// 2-octet length prefix followed by that many octets.
  ByteView prefixed16();
  /// 4-octet length prefix followed by that many octets.
  ByteView prefixed32();

  template <std::size_t N>
  std::array<uint8_t, N> fixed() {
    std::array<uint8_t, N> out{};
    auto src = take(N);
    std::copy(src.begin(), src.end(), out.begin());
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const;

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

void append_prefixed16(Bytes& out, ByteView data);
void append_prefixed32(Bytes& out, ByteView data);

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

std::string base64_encode(ByteView data);
Bytes base64_decode(std::string_view text);

/// True when `needle` occurs as a contiguous run inside `haystack`. Empty needles never match.
bool contains_subsequence(ByteView haystack, ByteView needle);

/// Constant-time equality for equal-length inputs; false on length mismatch.
bool constant_time_equal(ByteView a, ByteView b);

bool is_all_zero(ByteView data);

}  // namespace locathe
