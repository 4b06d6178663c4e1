#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "locathe/bytes.hpp"
#include "locathe/key_schedule.hpp"

namespace locathe {

inline constexpr uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 22;
inline constexpr std::size_t kAdvertSize = 22;
inline constexpr std::size_t kMaxAdvertSize = 31;
inline constexpr std::size_t kIcvSize = 16;
inline constexpr std::size_t kMaxSections = 16;

enum class MsgType : uint8_t {
  Advert = 1,
  BnonceFetchReq = 2,
  BnonceFetchResp = 3,
  KeReq = 4,
  KeResp = 5,
  T1AuthReq = 6,
  T1AuthResp = 7,
  T2Msg1 = 8,
  T2Msg2 = 9,
  FinalAuthReq = 10,
  FinalAuthResp = 11,
  Error = 12,
};

std::string_view to_string(MsgType t);
bool is_known_type(uint8_t t);

/// Coarse reason carried by ERROR messages.
enum class ErrorClass : uint8_t { Protocol = 1, Auth = 2, Internal = 3 };

/// version ‖ ADVERT ‖ beacon_id(8) ‖ fetch handle(8) ‖ reserved(4).
struct Advert {
  Octets8 beacon_id{};
  Octets8 handle{};

  Bytes encode() const;
  /// MalformedMessage on wrong size, version or type.
  static Advert decode(ByteView bytes);
  bool operator==(const Advert&) const = default;
};

/// version(1) ‖ type(1) ‖ spi_i(8) ‖ spi_r(8) ‖ counter(4) ‖ sections, each 2-octet length prefixed.
struct ProtocolMessage {
  MsgType type = MsgType::Error;
  SessionIds ids;
  uint32_t counter = 0;
  std::vector<Bytes> sections;

  Bytes header() const;
  Bytes encode() const;
  /// MalformedMessage on any framing problem, unknown type, or an ADVERT.
  static ProtocolMessage decode(ByteView bytes);
  bool operator==(const ProtocolMessage&) const = default;
};

/// Type octet of a framed message, without validating the rest.
std::optional<MsgType> peek_type(ByteView bytes);

Bytes encode_sections(const std::vector<Bytes>& sections);
std::vector<Bytes> decode_sections(ByteView bytes);

/// Builds an encrypted message: one section holding enc_auth(sk_e, 0^8 ‖ counter, inner, header) ‖ ICV,
/// ICV = first 16 octets of prf(sk_a, header ‖ ciphertext).
ProtocolMessage seal(MsgType type, const SessionIds& ids, uint32_t counter, const std::vector<Bytes>& inner,
                     const KeySchedule& ks, Role sender);
/// Inverse of seal with the sender's direction keys. DecryptFailed on any integrity failure.
std::vector<Bytes> open(const ProtocolMessage& msg, const KeySchedule& ks, Role sender);

}  // namespace locathe
