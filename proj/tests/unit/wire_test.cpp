#include <catch2/catch_amalgamated.hpp>

#include "locathe/error.hpp"
#include "locathe/wire.hpp"

using namespace locathe;

namespace {

KeySchedule test_keys() {
  Block32 n_i{}, n_r{};
  n_i.fill(1);
  n_r.fill(2);
  SessionIds ids{{1, 1, 1, 1, 1, 1, 1, 1}, {2, 2, 2, 2, 2, 2, 2, 2}};
  return derive_sks(compute_keyseed(Point::generator(), n_i, n_r), n_i, n_r, ids);
}

}  // namespace

TEST_CASE("header layout", "[wire]") {
  ProtocolMessage m{MsgType::KeReq, {{1, 2, 3, 4, 5, 6, 7, 8}, {}}, 0x01020304, {Bytes{0xaa, 0xbb}}};
  Bytes w = m.encode();
  REQUIRE(w.size() == kHeaderSize + 4);
  CHECK(w[0] == kWireVersion);
  CHECK(w[1] == 4);
  CHECK(w[2] == 1);
  CHECK(w[18] == 1);
  CHECK(w[21] == 4);
  CHECK(w[22] == 0);
  CHECK(w[23] == 2);
  CHECK(ProtocolMessage::decode(w) == m);
  CHECK(peek_type(w) == MsgType::KeReq);
}

TEST_CASE("framing errors", "[wire]") {
  ProtocolMessage m{MsgType::KeResp, {}, 1, {Bytes(5, 1)}};
  Bytes w = m.encode();
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (n == kHeaderSize) continue;  // a header with no sections is well formed
    CHECK_THROWS_AS(ProtocolMessage::decode(ByteView(w).first(n)), Error);
  }
  Bytes bad = w;
  bad[0] = 2;
  CHECK_THROWS_AS(ProtocolMessage::decode(bad), Error);
  bad = w;
  bad[1] = 0;
  CHECK_THROWS_AS(ProtocolMessage::decode(bad), Error);
  bad[1] = 1;
  CHECK_THROWS_AS(ProtocolMessage::decode(bad), Error);
  m.sections.assign(kMaxSections + 1, Bytes{});
  CHECK_THROWS_AS(m.encode(), Error);
}

TEST_CASE("advert codec", "[wire]") {
  Advert a{{1, 2, 3, 4, 5, 6, 7, 8}, {9, 9, 9, 9, 9, 9, 9, 9}};
  Bytes w = a.encode();
  CHECK(w.size() == kAdvertSize);
  CHECK(w.size() <= kMaxAdvertSize);
  CHECK(Advert::decode(w) == a);
  w.back() = 1;
  CHECK_THROWS_AS(Advert::decode(w), Error);
  CHECK_THROWS_AS(ProtocolMessage::decode(a.encode()), Error);
}

TEST_CASE("seal and open", "[wire]") {
  auto ks = test_keys();
  SessionIds ids{{1, 1, 1, 1, 1, 1, 1, 1}, {2, 2, 2, 2, 2, 2, 2, 2}};
  std::vector<Bytes> inner{Bytes{1, 2, 3}, Bytes{}, Bytes(40, 7)};
  auto m = seal(MsgType::T1AuthReq, ids, 3, inner, ks, Role::Initiator);
  CHECK(open(m, ks, Role::Initiator) == inner);
  // Wrong direction, altered header and altered body all fail closed.
  CHECK_THROWS_AS(open(m, ks, Role::Responder), Error);
  auto moved = m;
  moved.counter = 4;
  CHECK_THROWS_AS(open(moved, ks, Role::Initiator), Error);
  auto retyped = m;
  retyped.type = MsgType::FinalAuthReq;
  CHECK_THROWS_AS(open(retyped, ks, Role::Initiator), Error);
  for (std::size_t i = 0; i < m.sections[0].size(); i += 7) {
    auto flipped = m;
    flipped.sections[0][i] ^= 0x01;
    try {
      open(flipped, ks, Role::Initiator);
      FAIL("tampered message opened");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DecryptFailed);
    }
  }
  // Plaintext sections do not appear in the sealed form.
  CHECK_FALSE(contains_subsequence(m.encode(), inner[2]));
}
