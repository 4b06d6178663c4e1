#include "locathe/wire.hpp"

#include "locathe/error.hpp"

namespace locathe {
namespace {

Nonce12 counter_nonce(uint32_t counter) {
  Nonce12 n{};
  n[8] = static_cast<uint8_t>(counter >> 24);
  n[9] = static_cast<uint8_t>(counter >> 16);
  n[10] = static_cast<uint8_t>(counter >> 8);
  n[11] = static_cast<uint8_t>(counter);
  return n;
}

Bytes icv(const SymmetricKey& sk_a, ByteView header, ByteView ct) {
  auto mac = prf(PrfKey(sk_a.bytes()), concat(header, ct));
  return Bytes(mac.begin(), mac.begin() + kIcvSize);
}

}  // namespace

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::Advert: return "ADVERT";
    case MsgType::BnonceFetchReq: return "BNONCE_FETCH_REQ";
    case MsgType::BnonceFetchResp: return "BNONCE_FETCH_RESP";
    case MsgType::KeReq: return "KE_REQ";
    case MsgType::KeResp: return "KE_RESP";
    case MsgType::T1AuthReq: return "T1_AUTH_REQ";
    case MsgType::T1AuthResp: return "T1_AUTH_RESP";
    case MsgType::T2Msg1: return "T2_MSG1";
    case MsgType::T2Msg2: return "T2_MSG2";
    case MsgType::FinalAuthReq: return "FINAL_AUTH_REQ";
    case MsgType::FinalAuthResp: return "FINAL_AUTH_RESP";
    case MsgType::Error: return "ERROR";
  }
  return "UNKNOWN";
}

bool is_known_type(uint8_t t) { return t >= 1 && t <= 12; }

Bytes Advert::encode() const {
  Bytes out{kWireVersion, static_cast<uint8_t>(MsgType::Advert)};
  append(out, beacon_id);
  append(out, handle);
  out.resize(kAdvertSize, 0);
  return out;
}

Advert Advert::decode(ByteView bytes) {
  if (bytes.size() != kAdvertSize) throw Error(ErrorCode::MalformedMessage, "advert size");
  Reader r(bytes);
  if (r.u8() != kWireVersion) throw Error(ErrorCode::MalformedMessage, "wire version");
  if (r.u8() != static_cast<uint8_t>(MsgType::Advert)) throw Error(ErrorCode::MalformedMessage, "not an advert");
  Advert a{r.fixed<8>(), r.fixed<8>()};
  if (!is_all_zero(r.take(4))) throw Error(ErrorCode::MalformedMessage, "reserved octets set");
  return a;
}

Bytes ProtocolMessage::header() const {
  Bytes out{kWireVersion, static_cast<uint8_t>(type)};
  append(out, ids.spi_i);
  append(out, ids.spi_r);
  append_u32_be(out, counter);
  return out;
}

Bytes ProtocolMessage::encode() const {
  if (sections.size() > kMaxSections) throw Error(ErrorCode::MalformedMessage, "too many sections");
  Bytes out = header();
  append(out, encode_sections(sections));
  return out;
}

ProtocolMessage ProtocolMessage::decode(ByteView bytes) {
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::MalformedMessage, "short header");
  Reader r(bytes);
  if (r.u8() != kWireVersion) throw Error(ErrorCode::MalformedMessage, "wire version");
  uint8_t type = r.u8();
  if (!is_known_type(type) || type == static_cast<uint8_t>(MsgType::Advert))
    throw Error(ErrorCode::MalformedMessage, "message type");
  ProtocolMessage m;
  m.type = static_cast<MsgType>(type);
  m.ids.spi_i = r.fixed<8>();
  m.ids.spi_r = r.fixed<8>();
  m.counter = r.u32();
  m.sections = decode_sections(r.take(r.remaining()));
  return m;
}

std::optional<MsgType> peek_type(ByteView bytes) {
  if (bytes.size() < 2 || bytes[0] != kWireVersion || !is_known_type(bytes[1])) return std::nullopt;
  return static_cast<MsgType>(bytes[1]);
}

Bytes encode_sections(const std::vector<Bytes>& sections) {
  Bytes out;
  for (const auto& s : sections) append_prefixed16(out, s);
  return out;
}

std::vector<Bytes> decode_sections(ByteView bytes) {
  Reader r(bytes);
  std::vector<Bytes> out;
  while (r.remaining() > 0) {
    if (out.size() == kMaxSections) throw Error(ErrorCode::MalformedMessage, "too many sections");
    auto s = r.prefixed16();
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

ProtocolMessage seal(MsgType type, const SessionIds& ids, uint32_t counter, const std::vector<Bytes>& inner,
                     const KeySchedule& ks, Role sender) {
  ProtocolMessage m{type, ids, counter, {}};
  Bytes header = m.header();
  Bytes ct = enc_auth(ks.enc_key(sender), counter_nonce(counter), encode_sections(inner), header);
  append(ct, icv(ks.auth_key(sender), header, ct));
  m.sections.push_back(std::move(ct));
  return m;
}

std::vector<Bytes> open(const ProtocolMessage& msg, const KeySchedule& ks, Role sender) {
  if (msg.sections.size() != 1 || msg.sections[0].size() < kAeadTagSize + kIcvSize)
    throw Error(ErrorCode::DecryptFailed, "not a sealed message");
  Bytes header = msg.header();
  ByteView body(msg.sections[0]);
  auto ct = body.first(body.size() - kIcvSize);
  if (!constant_time_equal(icv(ks.auth_key(sender), header, ct), body.last(kIcvSize)))
    throw Error(ErrorCode::DecryptFailed, "integrity check failed");
  try {
    return decode_sections(dec_auth(ks.enc_key(sender), counter_nonce(msg.counter), ct, header));
  } catch (const Error& e) {
    throw Error(ErrorCode::DecryptFailed, e.what());
  }
}

}  // namespace locathe
