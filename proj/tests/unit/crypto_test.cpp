#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "locathe/crypto.hpp"
#include "locathe/error.hpp"
#include "oracles.hpp"

using namespace locathe;

namespace {

Bytes hex(std::string_view h) { return from_hex(h); }

}  // namespace

TEST_CASE("prf matches published HMAC-SHA256 vectors", "[crypto][prf]") {
  // RFC 4231 test cases 1 and 2.
  Bytes key1(20, 0x0b);
  CHECK(to_hex(prf(PrfKey(key1), view("Hi There"))) ==
        "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
  CHECK(to_hex(prf(PrfKey(view("Jefe")), view("what do ya want for nothing?"))) ==
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST_CASE("prf agrees with an independent HMAC construction", "[crypto][prf]") {
  DeterministicRandom rng(11);
  for (int i = 0; i < 10; ++i) {
    Bytes key = rng.bytes(1 + rng.uniform(64));
    Bytes msg = rng.bytes(rng.uniform(200));
    auto expected = oracle::hmac_sha256(key, msg);
    auto got = prf(PrfKey(key), msg);
    CHECK(Bytes(got.begin(), got.end()) == expected);
  }
}

TEST_CASE("prf is deterministic and separates inputs", "[crypto][prf]") {
  DeterministicRandom rng(12);
  Bytes key = rng.bytes(32);
  CHECK(prf(PrfKey(key), view("m")) == prf(PrfKey(key), view("m")));

  std::set<Block32> outputs;
  for (int i = 0; i < 1000; ++i) {
    Bytes m1 = rng.bytes(24);
    Bytes m2 = m1;
    m2[rng.uniform(m2.size())] ^= static_cast<uint8_t>(1 + rng.uniform(255));
    auto a = prf(PrfKey(key), m1);
    auto b = prf(PrfKey(key), m2);
    CHECK(a != b);
    outputs.insert(a);
  }
  CHECK(outputs.size() == 1000);
}

TEST_CASE("prf key length bounds", "[crypto][prf]") {
  CHECK_THROWS_AS(PrfKey(Bytes{}), Error);
  CHECK_THROWS_AS(PrfKey(Bytes(65, 1)), Error);
  CHECK_NOTHROW(PrfKey(Bytes(64, 1)));
}

TEST_CASE("prf_plus block structure", "[crypto][prf_plus]") {
  DeterministicRandom rng(13);
  Bytes key = rng.bytes(32);
  Bytes data = rng.bytes(40);

  Bytes first_block_input = data;
  first_block_input.push_back(0x01);
  auto one = prf_plus(PrfKey(key), data, 32);
  auto direct = prf(PrfKey(key), first_block_input);
  CHECK(one == Bytes(direct.begin(), direct.end()));

  auto two = prf_plus(PrfKey(key), data, 64);
  CHECK(Bytes(two.begin(), two.begin() + 32) == one);

  CHECK(prf_plus(PrfKey(key), data, 96) == oracle::prf_plus_iterated(key, data, 96));
  CHECK(prf_plus(PrfKey(key), data, 192) == oracle::prf_plus_iterated(key, data, 192));
}

TEST_CASE("prf_plus prefix property and length limit", "[crypto][prf_plus]") {
  DeterministicRandom rng(14);
  Bytes key = rng.bytes(16);
  Bytes data = rng.bytes(8);
  auto longest = prf_plus(PrfKey(key), data, 300);
  for (std::size_t n = 1; n < 300; n += 7) {
    auto shorter = prf_plus(PrfKey(key), data, n);
    REQUIRE(shorter.size() == n);
    CHECK(std::equal(shorter.begin(), shorter.end(), longest.begin()));
  }
  CHECK(prf_plus(PrfKey(key), data, kPrfPlusMaxOutput).size() == 255 * 32);
  try {
    prf_plus(PrfKey(key), data, kPrfPlusMaxOutput + 1);
    FAIL("expected LengthTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthTooLarge);
  }
}

TEST_CASE("kdf_stretch", "[crypto][kdf]") {
  DeterministicRandom rng(15);
  Bytes secret = to_bytes("correct horse");
  Bytes salt = rng.bytes(16);
  CHECK(kdf_stretch(secret, salt, 100) == kdf_stretch(secret, salt, 100));

  std::set<Block32> keys;
  for (int i = 0; i < 50; ++i) keys.insert(kdf_stretch(secret, rng.bytes(16), 10).block());
  CHECK(keys.size() == 50);

  auto one = kdf_stretch(secret, salt, 1);
  CHECK(Bytes(one.bytes().begin(), one.bytes().end()) == oracle::pbkdf2_one_iteration(secret, salt));

  try {
    kdf_stretch(Bytes{}, salt);
    FAIL("expected EmptySecret");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySecret);
  }
}

TEST_CASE("ecdhe key pairs", "[crypto][ec]") {
  DeterministicRandom rng(16);
  auto kp = ecdhe_keypair(rng);
  CHECK_FALSE(kp.public_point.is_identity());
  CHECK_NOTHROW(Point::decode(kp.public_point.encode()));
  CHECK(kp.secret * Point::generator() == kp.public_point);

  std::set<Block32> scalars;
  for (int i = 0; i < 1000; ++i) scalars.insert(ecdhe_keypair(rng).secret.to_bytes());
  CHECK(scalars.size() == 1000);
}

TEST_CASE("dh agreement and validation", "[crypto][ec]") {
  DeterministicRandom rng(17);
  for (int i = 0; i < 100; ++i) {
    auto a = ecdhe_keypair(rng);
    auto b = ecdhe_keypair(rng);
    REQUIRE(dh(a.secret, b.public_point) == dh(b.secret, a.public_point));
  }
  auto p = ecdhe_keypair(rng).public_point;
  CHECK(dh(Scalar::from_u64(1), p) == p);
  try {
    dh(Scalar::from_u64(5), Point::identity());
    FAIL("expected InvalidPeerPoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidPeerPoint);
  }
}

TEST_CASE("point encoding is canonical and validated", "[crypto][ec]") {
  DeterministicRandom rng(18);
  auto p = ecdhe_keypair(rng).public_point;
  auto enc = p.encode();
  CHECK(Point::decode(enc) == p);
  CHECK(Point::decode(Point::identity().encode()).is_identity());

  auto bad_prefix = enc;
  bad_prefix[0] = 0x04;
  CHECK_THROWS_AS(Point::decode(bad_prefix), Error);
  CHECK_THROWS_AS(Point::decode(ByteView(enc).first(32)), Error);

  // x = p (field prime) is out of range.
  Bytes out_of_range = hex("02ffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
  CHECK_THROWS_AS(Point::decode(out_of_range), Error);

  // Some x values have no square root; find one and check it is rejected.
  int rejected = 0;
  for (int i = 0; i < 20; ++i) {
    Bytes candidate(33);
    candidate[0] = 0x02;
    rng.fill(std::span<uint8_t>(candidate).subspan(1));
    try {
      Point::decode(candidate);
    } catch (const Error&) {
      ++rejected;
    }
  }
  CHECK(rejected > 0);
}

TEST_CASE("scalar arithmetic", "[crypto][ec]") {
  DeterministicRandom rng(19);
  auto a = Scalar::random_nonzero(rng);
  auto b = Scalar::random_nonzero(rng);
  auto g = Point::generator();
  CHECK((a + b) * g == a * g + b * g);
  CHECK((a * b) * g == a * (b * g));
  CHECK((a - a).is_zero());
  CHECK((a * a.inverse()) == Scalar::from_u64(1));
  CHECK((-a) * g == -(a * g));
  CHECK((a * g + (-a) * g).is_identity());
  CHECK(Scalar::reduce(a.to_bytes()) == a);

  Bytes order = hex("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551");
  CHECK_THROWS_AS(Scalar::from_bytes(order), Error);
  CHECK(Scalar::reduce(order).is_zero());
}

TEST_CASE("hash_to_curve is deterministic and independent", "[crypto][ec]") {
  auto q1 = Point::hash_to_curve("locathe/test/Q");
  auto q2 = Point::hash_to_curve("locathe/test/Q");
  auto q3 = Point::hash_to_curve("locathe/test/R");
  CHECK(q1 == q2);
  CHECK_FALSE(q1 == q3);
  CHECK_FALSE(q1.is_identity());
}

TEST_CASE("enc_auth round trip and integrity", "[crypto][aead]") {
  DeterministicRandom rng(20);
  auto key = SymmetricKey::random(rng);
  auto nonce = rng.array<12>();
  Bytes pt = rng.bytes(57);
  Bytes aad = to_bytes("header");
  auto ct = enc_auth(key, nonce, pt, aad);
  CHECK(dec_auth(key, nonce, ct, aad) == pt);

  auto expect_fail = [](auto&& fn) {
    try {
      fn();
      FAIL("expected AuthenticationFailed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AuthenticationFailed);
    }
  };
  for (std::size_t bit = 0; bit < ct.size() * 8; bit += 13) {
    auto tampered = ct;
    tampered[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    expect_fail([&] { dec_auth(key, nonce, tampered, aad); });
  }
  for (std::size_t bit = 0; bit < aad.size() * 8; ++bit) {
    auto tampered = aad;
    tampered[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    expect_fail([&] { dec_auth(key, nonce, ct, tampered); });
  }
  for (std::size_t bit = 0; bit < 96; ++bit) {
    auto tampered = nonce;
    tampered[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    expect_fail([&] { dec_auth(key, tampered, ct, aad); });
  }
  expect_fail([&] { dec_auth(SymmetricKey::random(rng), nonce, ct, aad); });
  expect_fail([&] { dec_auth(key, nonce, Bytes(5, 0), aad); });
}

TEST_CASE("enc_plain never rejects", "[crypto][plain]") {
  DeterministicRandom rng(21);
  auto key = SymmetricKey::random(rng);
  auto nonce = rng.array<12>();
  Bytes pt = rng.bytes(32);
  auto ct = enc_plain(key, nonce, pt);
  CHECK(ct.size() == pt.size());
  CHECK(dec_plain(key, nonce, ct) == pt);

  std::set<Bytes> candidates;
  for (int i = 0; i < 100; ++i) {
    Bytes out;
    REQUIRE_NOTHROW(out = dec_plain(SymmetricKey::random(rng), nonce, ct));
    CHECK(out.size() == pt.size());
    CHECK(out != pt);
    candidates.insert(out);
  }
  CHECK(candidates.size() == 100);
}

TEST_CASE("signatures", "[crypto][sign]") {
  DeterministicRandom rng(22);
  auto sk = SigningKey::generate(rng);
  Bytes data = to_bytes("bnonce octets");
  auto sig = sign(sk, data);
  CHECK(verify(sk.verify_key(), data, sig));
  CHECK(sig == sign(sk, data));

  Bytes altered = data;
  altered[0] ^= 1;
  CHECK_FALSE(verify(sk.verify_key(), altered, sig));
  auto bad_sig = sig;
  bad_sig[10] ^= 0x40;
  CHECK_FALSE(verify(sk.verify_key(), data, bad_sig));
  CHECK_FALSE(verify(SigningKey::generate(rng).verify_key(), data, sig));
  try {
    verify(sk.verify_key(), data, ByteView(sig).first(63));
    FAIL("expected MalformedSignature");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedSignature);
  }
}

TEST_CASE("totp matches published SHA-256 time-step vectors", "[crypto][totp]") {
  // RFC 6238 appendix B, SHA-256 column, 8 digits, 30 s step.
  TokenSeed seed{to_bytes("12345678901234567890123456789012"), 30, 8};
  CHECK(totp(seed, 59) == "46119246");
  CHECK(totp(seed, 1111111109) == "68084774");
  CHECK(totp(seed, 1111111111) == "67062674");
  CHECK(totp(seed, 1234567890) == "91819424");
  CHECK(totp(seed, 2000000000) == "90698825");
  CHECK(totp(seed, 20000000000) == "77737706");
}

TEST_CASE("totp epoch flooring and format", "[crypto][totp]") {
  DeterministicRandom rng(23);
  TokenSeed seed{rng.bytes(20), 30, 8};
  CHECK(totp(seed, 0) == totp(seed, 29));
  CHECK(totp(seed, 0) != totp(seed, 30));
  for (uint32_t digits = 6; digits <= 9; ++digits) {
    seed.digits = digits;
    CHECK(totp(seed, 12345).size() == digits);
  }
  seed.digits = 5;
  CHECK_THROWS_AS(totp(seed, 0), Error);
  seed.digits = 8;
  seed.step_seconds = 0;
  CHECK_THROWS_AS(totp(seed, 0), Error);
}

TEST_CASE("deterministic random streams", "[crypto][rng]") {
  DeterministicRandom a(99), b(99), c(100);
  auto x = a.bytes(100);
  CHECK(x == b.bytes(100));
  CHECK(x != c.bytes(100));
  DeterministicRandom parent(5);
  CHECK(parent.fork("alice").bytes(32) != parent.fork("bob").bytes(32));
  CHECK(parent.fork("alice").bytes(32) == parent.fork("alice").bytes(32));
}

TEST_CASE("fingerprint hides the secret", "[crypto]") {
  Bytes secret(32, 0xAB);
  auto fp = fingerprint(secret);
  CHECK(fp.size() == 8);
  CHECK(fp.find("abab") == std::string::npos);
}
