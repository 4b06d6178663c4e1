#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "locathe/error.hpp"
#include "locathe/key_schedule.hpp"
#include "oracles.hpp"

using namespace locathe;

namespace {

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Format;
}

Bytes enc(const Point& p) { return to_bytes(p.encode()); }

SessionIds random_ids(RandomSource& rng) { return {rng.array<8>(), rng.array<8>()}; }

SessionNonces random_nonces(RandomSource& rng) { return {rng.array<32>(), rng.array<32>(), rng.array<32>()}; }

/// Both halves of one honest exchange computed independently from each side's view.
struct Side {
  Block32 keyseed;
  KeySchedule ks;
  SymmetricKey kpwd;
  Point ge;
  Tier2KeyPair pair;
  Point auth_shared;
  Block32 gtk;
  LongTermSecret ltk;
};

struct Exchange {
  Side initiator, responder;
  Scalar s;
};

Exchange run_exchange(RandomSource& rng, ByteView spwd, std::string_view tk_i, std::string_view tk_r,
                      Timestamp now) {
  auto ki = ecdhe_keypair(rng);
  auto kr = ecdhe_keypair(rng);
  auto nonces = random_nonces(rng);
  auto ids = random_ids(rng);

  auto derive = [&](const Scalar& mine, const Point& theirs) {
    Point shared = dh(mine, theirs);
    auto seed = compute_keyseed(shared, nonces.n_i, nonces.n_r);
    return std::pair{shared, seed};
  };
  auto [shared_i, seed_i] = derive(ki.secret, kr.public_point);
  auto [shared_r, seed_r] = derive(kr.secret, ki.public_point);

  Scalar s = Scalar::random_nonzero(rng);
  Nonce12 iv = rng.array<12>();
  auto kpwd_i = derive_kpwd(spwd, nonces.n_i, nonces.n_r, ids);
  auto enonce = make_enonce(kpwd_i, s, iv);
  auto kpwd_r = derive_kpwd(spwd, nonces.n_i, nonces.n_r, ids);
  Scalar s_r = open_enonce(kpwd_r, iv, enonce);

  Point ge_i = compute_ge(s, shared_i);
  Point ge_r = compute_ge(s_r, shared_r);
  auto pair_i = tier2_keypair(ge_i, rng);
  auto pair_r = tier2_keypair(ge_r, rng);
  Point as_i = compute_auth_shared_secret(pair_i.lsk, pair_r.lpk);
  Point as_r = compute_auth_shared_secret(pair_r.lsk, pair_i.lpk);

  Exchange x{
      Side{seed_i, derive_sks(seed_i, nonces.n_i, nonces.n_r, ids), kpwd_i, ge_i, pair_i, as_i,
           compute_gtk(ge_i, tk_i), compute_long_term_secret(as_i, nonces.n_i, nonces.n_r, ids, now)},
      Side{seed_r, derive_sks(seed_r, nonces.n_i, nonces.n_r, ids), kpwd_r, ge_r, pair_r, as_r,
           compute_gtk(ge_r, tk_r), compute_long_term_secret(as_r, nonces.n_i, nonces.n_r, ids, now)},
      s};
  return x;
}

}  // namespace

TEST_CASE("keyseed", "[key_schedule]") {
  DeterministicRandom rng(1);
  auto a = ecdhe_keypair(rng), b = ecdhe_keypair(rng);
  auto n_i = rng.array<32>(), n_r = rng.array<32>();
  auto left = compute_keyseed(dh(a.secret, b.public_point), n_i, n_r);
  CHECK(left == compute_keyseed(dh(b.secret, a.public_point), n_i, n_r));
  auto flipped = n_r;
  flipped[7] ^= 1;
  CHECK(left != compute_keyseed(dh(a.secret, b.public_point), n_i, flipped));
  CHECK(error_of([&] { compute_keyseed(Point::identity(), n_i, n_r); }) == ErrorCode::IdentitySharedSecret);

  for (int i = 0; i < 10; ++i) {
    auto x = ecdhe_keypair(rng), y = ecdhe_keypair(rng);
    auto ni = rng.array<32>(), nr = rng.array<32>();
    Point shared = dh(x.secret, y.public_point);
    auto expected = oracle::hmac_sha256(concat(ni, nr), enc(shared));
    CHECK(to_bytes(compute_keyseed(shared, ni, nr)) == expected);
  }
}

TEST_CASE("derive_sks layout", "[key_schedule]") {
  DeterministicRandom rng(2);
  auto seed = rng.array<32>();
  auto n_i = rng.array<32>(), n_r = rng.array<32>();
  auto ids = random_ids(rng);
  auto ks = derive_sks(seed, n_i, n_r, ids);
  auto stream = oracle::prf_plus_iterated(seed, concat(n_i, n_r, ids.spi_i, ids.spi_r), 192);
  const SymmetricKey* order[] = {&ks.sk_ei, &ks.sk_ai, &ks.sk_er, &ks.sk_ar, &ks.sk_pi, &ks.sk_pr};
  std::set<Bytes> distinct;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(to_bytes(order[i]->bytes()) == Bytes(stream.begin() + 32 * i, stream.begin() + 32 * (i + 1)));
    distinct.insert(to_bytes(order[i]->bytes()));
  }
  CHECK(distinct.size() == 6);
  CHECK(&ks.enc_key(Role::Initiator) == &ks.sk_ei);
  CHECK(&ks.auth_key(Role::Responder) == &ks.sk_ar);
  CHECK(&ks.prf_key(Role::Responder) == &ks.sk_pr);

  for (int i = 0; i < 20; ++i) {
    auto other = derive_sks(seed, n_i, n_r, random_ids(rng));
    CHECK(other.sk_ei != ks.sk_ei);
    CHECK(other.sk_ai != ks.sk_ai);
    CHECK(other.sk_er != ks.sk_er);
    CHECK(other.sk_ar != ks.sk_ar);
    CHECK(other.sk_pi != ks.sk_pi);
    CHECK(other.sk_pr != ks.sk_pr);
  }
}

TEST_CASE("session ids", "[key_schedule]") {
  SessionIds ids{{1}, {2}};
  CHECK(ids.valid());
  CHECK(ids.encode().size() == 16);
  CHECK_FALSE((SessionIds{{1}, {1}}.valid()));
  CHECK_FALSE((SessionIds{{}, {2}}.valid()));
}

TEST_CASE("auth tier 1", "[key_schedule]") {
  DeterministicRandom rng(3);
  auto nonces = random_nonces(rng);
  auto ke_r = ecdhe_keypair(rng).public_point;
  Bytes so = rng.bytes(100);
  auto a = compute_auth_tier1(Role::Initiator, nonces, ke_r, so);
  CHECK(a == compute_auth_tier1(Role::Initiator, nonces, ke_r, so));
  CHECK(a != compute_auth_tier1(Role::Responder, nonces, ke_r, so));

  auto stale = nonces;
  stale.n_b[31] ^= 0x80;
  CHECK(a != compute_auth_tier1(Role::Initiator, stale, ke_r, so));

  Bytes label = concat(view("LOCATHE-T1"), Bytes{0x49}, nonces.n_i, nonces.n_r);
  auto inner = oracle::hmac_sha256(nonces.n_b, label);
  CHECK(to_bytes(a) == oracle::hmac_sha256(inner, concat(so, enc(ke_r))));
}

TEST_CASE("signed octets", "[key_schedule]") {
  DeterministicRandom rng(4);
  Bytes transcript = rng.bytes(64);
  auto sk_p = SymmetricKey::random(rng);
  auto peer = rng.array<32>();
  Bytes id = to_bytes("alice@example");

  auto anon = build_signed_octets(transcript, std::nullopt, sk_p, peer);
  CHECK(anon == concat(transcript, peer, oracle::hmac_sha256(sk_p.bytes(), Bytes{0x00})));
  CHECK_FALSE(contains_subsequence(anon, id));
  auto named = build_signed_octets(transcript, ByteView(id), sk_p, peer);
  CHECK(named != anon);
  CHECK(named == concat(transcript, peer, oracle::hmac_sha256(sk_p.bytes(), id)));

  for (std::size_t pos = 0; pos < 64; ++pos) {
    auto t = transcript;
    t[pos] ^= static_cast<uint8_t>(1u << (pos % 8));
    CHECK(build_signed_octets(t, std::nullopt, sk_p, peer) != anon);
  }
}

TEST_CASE("kpwd", "[key_schedule]") {
  DeterministicRandom rng(5);
  auto spwd = rng.bytes(32);
  auto n_i = rng.array<32>(), n_r = rng.array<32>();
  auto ids = random_ids(rng);
  auto k = derive_kpwd(spwd, n_i, n_r, ids);
  CHECK(to_bytes(k.bytes()) == oracle::hmac_sha256(spwd, concat(n_i, n_r, ids.spi_i, ids.spi_r)));
  CHECK(k != derive_kpwd(spwd, rng.array<32>(), n_r, ids));
}

TEST_CASE("enonce has no integrity signal", "[key_schedule]") {
  DeterministicRandom rng(6);
  auto kpwd = SymmetricKey::random(rng);
  Scalar s = Scalar::random_nonzero(rng);
  Nonce12 iv = rng.array<12>();
  auto enonce = make_enonce(kpwd, s, iv);
  CHECK(enonce.size() == kScalarSize);
  CHECK_FALSE(contains_subsequence(enonce, s.to_bytes()));
  CHECK(open_enonce(kpwd, iv, enonce) == s);

  std::set<Bytes> candidates;
  for (int i = 0; i < 100; ++i) {
    Scalar guess = open_enonce(SymmetricKey::random(rng), iv, enonce);
    CHECK_FALSE(guess == s);
    candidates.insert(to_bytes(guess.to_bytes()));
  }
  CHECK(candidates.size() == 100);
}

TEST_CASE("GE", "[key_schedule]") {
  DeterministicRandom rng(7);
  Point shared = ecdhe_keypair(rng).public_point;
  Scalar s = Scalar::random_nonzero(rng);
  Point ge = compute_ge(s, shared);
  CHECK(ge == compute_ge(s, shared));
  CHECK(ge == s * Point::generator() + shared);
  for (int i = 0; i < 20; ++i) CHECK_FALSE(compute_ge(Scalar::random_nonzero(rng), shared) == ge);

  Scalar k = Scalar::random_nonzero(rng);
  CHECK(error_of([&] { compute_ge(-k, k * Point::generator()); }) == ErrorCode::DegenerateGE);
  CHECK(error_of([&] { compute_ge(s, Point::identity()); }) == ErrorCode::IdentitySharedSecret);
}

TEST_CASE("tier 2 key pair", "[key_schedule]") {
  DeterministicRandom rng(8);
  Point ge = compute_ge(Scalar::random_nonzero(rng), ecdhe_keypair(rng).public_point);
  std::set<Bytes> seen;
  for (int i = 0; i < 50; ++i) {
    auto p = tier2_keypair(ge, rng);
    CHECK(p.lpk == p.lsk * ge);
    CHECK_FALSE(p.lpk.is_identity());
    seen.insert(to_bytes(p.lsk.to_bytes()));
  }
  CHECK(seen.size() == 50);
}

TEST_CASE("auth tier 2", "[key_schedule]") {
  DeterministicRandom rng(9);
  auto n_b = rng.array<32>();
  auto sk_p = SymmetricKey::random(rng);
  std::vector<Bytes> messages;
  for (int i = 0; i < 6; ++i) messages.push_back(rng.bytes(20 + i * 7));
  Bytes transcript;
  for (const auto& m : messages) append(transcript, m);

  auto a = compute_auth_tier2(n_b, transcript, sk_p);
  auto inner = oracle::hmac_sha256(n_b, to_bytes("LOCATHE-T2"));
  CHECK(to_bytes(a) == oracle::hmac_sha256(inner, concat(transcript, oracle::hmac_sha256(sk_p.bytes(),
                                                                                       to_bytes("LOCATHE-SKP")))));
  auto stale = rng.array<32>();
  CHECK(a != compute_auth_tier2(stale, transcript, sk_p));

  // Dropping any one message from the transcript changes the proof.
  for (std::size_t drop = 0; drop < messages.size(); ++drop) {
    Bytes shorter;
    for (std::size_t i = 0; i < messages.size(); ++i)
      if (i != drop) append(shorter, messages[i]);
    CHECK(a != compute_auth_tier2(n_b, shorter, sk_p));
  }
}

TEST_CASE("auth shared secret", "[key_schedule]") {
  DeterministicRandom rng(10);
  auto spwd = rng.bytes(32);
  auto x = run_exchange(rng, spwd, "12345678", "12345678", at_seconds(0));
  CHECK(x.initiator.auth_shared == x.responder.auth_shared);
  CHECK(error_of([&] { compute_auth_shared_secret(x.initiator.pair.lsk, Point::identity()); }) ==
        ErrorCode::InvalidPeerPoint);

  // Responder opening ENONCE with a kpwd from a different spwd lands on another GE.
  auto shared = ecdhe_keypair(rng).public_point;
  auto ids = random_ids(rng);
  auto ni = rng.array<32>(), nr = rng.array<32>();
  Nonce12 iv = rng.array<12>();
  Scalar s = Scalar::random_nonzero(rng);
  auto enonce = make_enonce(derive_kpwd(spwd, ni, nr, ids), s, iv);
  Scalar wrong = open_enonce(derive_kpwd(rng.bytes(32), ni, nr, ids), iv, enonce);
  auto pi = tier2_keypair(compute_ge(s, shared), rng);
  auto pr = tier2_keypair(compute_ge(wrong, shared), rng);
  CHECK_FALSE(compute_auth_shared_secret(pi.lsk, pr.lpk) == compute_auth_shared_secret(pr.lsk, pi.lpk));
}

TEST_CASE("gtk", "[key_schedule]") {
  DeterministicRandom rng(11);
  Point ge = compute_ge(Scalar::random_nonzero(rng), ecdhe_keypair(rng).public_point);
  TokenSeed seed{rng.bytes(32)};
  auto tk = totp(seed, 1'000'000);
  CHECK(to_bytes(compute_gtk(ge, tk)) == oracle::hmac_sha256(enc(ge), to_bytes(tk)));
  CHECK(compute_gtk(ge, totp(seed, 1'000'000 + 5)) == compute_gtk(ge, tk));
  auto next = totp(seed, 1'000'000 + 30);
  REQUIRE(next != tk);
  CHECK(compute_gtk(ge, next) != compute_gtk(ge, tk));
}

TEST_CASE("final auth", "[key_schedule]") {
  DeterministicRandom rng(12);
  Point as = ecdhe_keypair(rng).public_point;
  auto gtk = rng.array<32>();
  Bytes so = rng.bytes(80);
  auto a = compute_final_auth(Role::Responder, so, as, gtk);
  auto inner = oracle::hmac_sha256(enc(as), concat(gtk, Bytes{0x52}));
  CHECK(to_bytes(a) == oracle::hmac_sha256(inner, so));
  CHECK(a != compute_final_auth(Role::Initiator, so, as, gtk));
  auto other = gtk;
  other[0] ^= 1;
  CHECK(a != compute_final_auth(Role::Responder, so, as, other));
}

TEST_CASE("long term secret", "[key_schedule]") {
  DeterministicRandom rng(13);
  Point as = ecdhe_keypair(rng).public_point;
  auto ni = rng.array<32>(), nr = rng.array<32>();
  auto ids = random_ids(rng);
  auto t0 = at_seconds(5000);
  auto ltk = compute_long_term_secret(as, ni, nr, ids, t0);
  CHECK(to_bytes(ltk.key) ==
        oracle::hmac_sha256(enc(as), concat(to_bytes("LOCATHE-LTK"), ni, nr, ids.spi_i, ids.spi_r)));
  CHECK(ltk.valid_at(t0));
  CHECK(ltk.valid_at(t0 + std::chrono::seconds(3599)));
  CHECK_FALSE(ltk.valid_at(t0 + std::chrono::seconds(3600)));
}

TEST_CASE("direction separation", "[key_schedule]") {
  DeterministicRandom rng(14);
  auto x = run_exchange(rng, rng.bytes(32), "00000001", "00000001", at_seconds(0));
  const auto& ks = x.initiator.ks;
  Nonce12 nonce{};
  auto ct = enc_auth(ks.enc_key(Role::Initiator), nonce, view("hello"), {});
  CHECK(error_of([&] { dec_auth(ks.enc_key(Role::Responder), nonce, ct, {}); }) == ErrorCode::AuthenticationFailed);
  CHECK(dec_auth(x.responder.ks.enc_key(Role::Initiator), nonce, ct, {}) == to_bytes("hello"));
}

TEST_CASE("honest exchanges agree on every derived value", "[key_schedule][property]") {
  DeterministicRandom rng(15);
  auto spwd = rng.bytes(32);
  std::optional<Exchange> previous;
  for (int i = 0; i < 100; ++i) {
    auto x = run_exchange(rng, spwd, "42424242", "42424242", at_seconds(100));
    const auto& a = x.initiator;
    const auto& b = x.responder;
    REQUIRE(a.keyseed == b.keyseed);
    REQUIRE(a.ks == b.ks);
    REQUIRE(a.kpwd == b.kpwd);
    REQUIRE(a.ge == b.ge);
    REQUIRE(a.auth_shared == b.auth_shared);
    REQUIRE(a.gtk == b.gtk);
    REQUIRE(a.ltk.key == b.ltk.key);
    if (previous) {
      // Same long-term credentials, fresh ephemerals: nothing carries over.
      CHECK(a.ks.sk_ei != previous->initiator.ks.sk_ei);
      CHECK_FALSE(a.ge == previous->initiator.ge);
      CHECK_FALSE(a.auth_shared == previous->initiator.auth_shared);
      CHECK(a.ltk.key != previous->initiator.ltk.key);
    }
    previous = std::move(x);
  }
}

TEST_CASE("skewed token epochs break final agreement", "[key_schedule]") {
  DeterministicRandom rng(16);
  TokenSeed seed{rng.bytes(32)};
  auto x = run_exchange(rng, rng.bytes(32), totp(seed, 600), totp(seed, 630), at_seconds(0));
  CHECK(x.initiator.auth_shared == x.responder.auth_shared);
  CHECK(x.initiator.gtk != x.responder.gtk);
  Bytes so = rng.bytes(40);
  CHECK(compute_final_auth(Role::Initiator, so, x.initiator.auth_shared, x.initiator.gtk) !=
        compute_final_auth(Role::Initiator, so, x.responder.auth_shared, x.responder.gtk));
}
