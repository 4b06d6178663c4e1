#pragma once

#include <optional>
#include <string_view>

#include "locathe/bytes.hpp"
#include "locathe/crypto.hpp"
#include "locathe/random.hpp"
#include "locathe/time.hpp"

namespace locathe {

enum class Role : uint8_t { Initiator = 0x49, Responder = 0x52 };

inline constexpr Role peer_of(Role r) { return r == Role::Initiator ? Role::Responder : Role::Initiator; }
inline constexpr std::string_view role_name(Role r) { return r == Role::Initiator ? "initiator" : "responder"; }

inline constexpr std::size_t kSkOutputSize = 6 * 32;
inline constexpr Duration kLongTermSecretTtl = std::chrono::seconds(3600);

struct SessionIds {
  Octets8 spi_i{};
  Octets8 spi_r{};

  /// spi_i ‖ spi_r.
  Bytes encode() const { return concat(spi_i, spi_r); }
  bool valid() const { return spi_i != spi_r && !is_all_zero(spi_i) && !is_all_zero(spi_r); }
  bool operator==(const SessionIds&) const = default;
};

struct SessionNonces {
  Block32 n_b{};
  Block32 n_i{};
  Block32 n_r{};
};

/// Six directional keys sliced from prf+ in the order ei, ai, er, ar, pi, pr.
struct KeySchedule {
  Block32 keyseed{};
  SymmetricKey sk_ei, sk_ai, sk_er, sk_ar, sk_pi, sk_pr;

  const SymmetricKey& enc_key(Role sender) const { return sender == Role::Initiator ? sk_ei : sk_er; }
  const SymmetricKey& auth_key(Role sender) const { return sender == Role::Initiator ? sk_ai : sk_ar; }
  const SymmetricKey& prf_key(Role owner) const { return owner == Role::Initiator ? sk_pi : sk_pr; }
  bool operator==(const KeySchedule&) const = default;
};

struct Tier2KeyPair {
  Scalar lsk;
  Point lpk;
};

struct LongTermSecret {
  Block32 key{};
  Timestamp created_at{};
  Duration ttl = kLongTermSecretTtl;

  bool valid_at(Timestamp now) const { return created_at <= now && now < created_at + ttl; }
};

/// keyseed = prf(n_i ‖ n_r, encode(shared)). IdentitySharedSecret for the identity.
Block32 compute_keyseed(const Point& shared, ByteView n_i, ByteView n_r);

/// prf+(keyseed, n_i ‖ n_r ‖ spi_i ‖ spi_r, 192).
KeySchedule derive_sks(const Block32& keyseed, ByteView n_i, ByteView n_r, const SessionIds& ids);

/// prf(prf(n_b, "LOCATHE-T1" ‖ role ‖ n_i ‖ n_r), signed_octets ‖ encode(ke_r)).
Block32 compute_auth_tier1(Role role, const SessionNonces& nonces, const Point& ke_r, ByteView signed_octets);

/// transcript ‖ peer_nonce ‖ prf(sk_p, id_payload or 0x00).
Bytes build_signed_octets(ByteView transcript, std::optional<ByteView> id_payload, const SymmetricKey& sk_p,
                          ByteView peer_nonce);

/// prf(spwd, n_i ‖ n_r ‖ spi_i ‖ spi_r).
SymmetricKey derive_kpwd(ByteView spwd, ByteView n_i, ByteView n_r, const SessionIds& ids);

/// enc_plain(kpwd, nonce, encode(s)). Carries no MAC.
Bytes make_enonce(const SymmetricKey& kpwd, const Scalar& s, const Nonce12& nonce);
/// Inverse of make_enonce. Any key yields some scalar (reduced mod n); there is no failure signal.
Scalar open_enonce(const SymmetricKey& kpwd, const Nonce12& nonce, ByteView enonce);

/// GE = s·G + shared. DegenerateGE when the sum is the identity.
Point compute_ge(const Scalar& s, const Point& shared);

/// lpk = lsk·ge with lsk uniform nonzero.
Tier2KeyPair tier2_keypair(const Point& ge, RandomSource& rng);

/// prf(prf(n_b, "LOCATHE-T2"), transcript ‖ prf(sk_p, "LOCATHE-SKP")).
Block32 compute_auth_tier2(ByteView n_b, ByteView transcript, const SymmetricKey& sk_p);

/// lsk·peer_lpk. InvalidPeerPoint for the identity.
Point compute_auth_shared_secret(const Scalar& my_lsk, const Point& peer_lpk);

/// prf(encode(ge), tk).
Block32 compute_gtk(const Point& ge, std::string_view tk);

/// prf(prf(encode(auth_shared), gtk ‖ role), signed_octets).
Block32 compute_final_auth(Role role, ByteView signed_octets, const Point& auth_shared, const Block32& gtk);

/// key = prf(encode(auth_shared), "LOCATHE-LTK" ‖ n_i ‖ n_r ‖ spi_i ‖ spi_r); one hour lifetime.
LongTermSecret compute_long_term_secret(const Point& auth_shared, ByteView n_i, ByteView n_r, const SessionIds& ids,
                                        Timestamp now);

}  // namespace locathe
