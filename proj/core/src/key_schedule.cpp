#include "locathe/key_schedule.hpp"

#include "locathe/error.hpp"

namespace locathe {
namespace {

constexpr uint8_t kAnonymousTag = 0x00;

PrfKey point_key(const Point& p) {
  auto enc = p.encode();
  return PrfKey(enc);
}

SymmetricKey slice(const Bytes& stream, std::size_t index) {
  return SymmetricKey(ByteView(stream).subspan(index * 32, 32));
}

}  // namespace

Block32 compute_keyseed(const Point& shared, ByteView n_i, ByteView n_r) {
  if (shared.is_identity()) throw Error(ErrorCode::IdentitySharedSecret, "shared secret is the identity");
  return prf(PrfKey(concat(n_i, n_r)), shared.encode());
}

KeySchedule derive_sks(const Block32& keyseed, ByteView n_i, ByteView n_r, const SessionIds& ids) {
  Bytes stream = prf_plus(PrfKey(keyseed), concat(n_i, n_r, ids.spi_i, ids.spi_r), kSkOutputSize);
  KeySchedule ks{keyseed,          slice(stream, 0), slice(stream, 1), slice(stream, 2),
                 slice(stream, 3), slice(stream, 4), slice(stream, 5)};
  std::fill(stream.begin(), stream.end(), 0);
  return ks;
}

Block32 compute_auth_tier1(Role role, const SessionNonces& nonces, const Point& ke_r, ByteView signed_octets) {
  Bytes label = to_bytes("LOCATHE-T1");
  label.push_back(static_cast<uint8_t>(role));
  append(label, nonces.n_i);
  append(label, nonces.n_r);
  Block32 inner = prf(PrfKey(nonces.n_b), label);
  return prf(PrfKey(inner), concat(signed_octets, ke_r.encode()));
}

Bytes build_signed_octets(ByteView transcript, std::optional<ByteView> id_payload, const SymmetricKey& sk_p,
                          ByteView peer_nonce) {
  const uint8_t anonymous[] = {kAnonymousTag};
  ByteView id = id_payload ? *id_payload : ByteView(anonymous);
  return concat(transcript, peer_nonce, prf(PrfKey(sk_p.bytes()), id));
}

SymmetricKey derive_kpwd(ByteView spwd, ByteView n_i, ByteView n_r, const SessionIds& ids) {
  return SymmetricKey(prf(PrfKey(spwd), concat(n_i, n_r, ids.spi_i, ids.spi_r)));
}

Bytes make_enonce(const SymmetricKey& kpwd, const Scalar& s, const Nonce12& nonce) {
  return enc_plain(kpwd, nonce, s.to_bytes());
}

Scalar open_enonce(const SymmetricKey& kpwd, const Nonce12& nonce, ByteView enonce) {
  Bytes plain = dec_plain(kpwd, nonce, enonce);
  Scalar s = Scalar::reduce(plain);
  std::fill(plain.begin(), plain.end(), 0);
  return s;
}

Point compute_ge(const Scalar& s, const Point& shared) {
  if (shared.is_identity()) throw Error(ErrorCode::IdentitySharedSecret, "shared secret is the identity");
  Point ge = s * Point::generator() + shared;
  if (ge.is_identity()) throw Error(ErrorCode::DegenerateGE, "GE is the identity");
  return ge;
}

Tier2KeyPair tier2_keypair(const Point& ge, RandomSource& rng) {
  if (ge.is_identity()) throw Error(ErrorCode::DegenerateGE, "GE is the identity");
  Scalar lsk = Scalar::random_nonzero(rng);
  Point lpk = lsk * ge;
  return {std::move(lsk), std::move(lpk)};
}

Block32 compute_auth_tier2(ByteView n_b, ByteView transcript, const SymmetricKey& sk_p) {
  Block32 inner = prf(PrfKey(n_b), view("LOCATHE-T2"));
  return prf(PrfKey(inner), concat(transcript, prf(PrfKey(sk_p.bytes()), view("LOCATHE-SKP"))));
}

Point compute_auth_shared_secret(const Scalar& my_lsk, const Point& peer_lpk) { return dh(my_lsk, peer_lpk); }

Block32 compute_gtk(const Point& ge, std::string_view tk) { return prf(point_key(ge), view(tk)); }

Block32 compute_final_auth(Role role, ByteView signed_octets, const Point& auth_shared, const Block32& gtk) {
  Bytes label = to_bytes(gtk);
  label.push_back(static_cast<uint8_t>(role));
  Block32 inner = prf(point_key(auth_shared), label);
  return prf(PrfKey(inner), signed_octets);
}

LongTermSecret compute_long_term_secret(const Point& auth_shared, ByteView n_i, ByteView n_r, const SessionIds& ids,
                                        Timestamp now) {
  Bytes data = concat(view("LOCATHE-LTK"), n_i, n_r, ids.spi_i, ids.spi_r);
  return {prf(point_key(auth_shared), data), now, kLongTermSecretTtl};
}

}  // namespace locathe
