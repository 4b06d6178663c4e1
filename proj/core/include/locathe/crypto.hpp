#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "locathe/bytes.hpp"
#include "locathe/random.hpp"

struct ec_point_st;

namespace locathe {

// Pinned algorithm identities. Both endpoints agree on these at registration; nothing is
// negotiated on the wire.
inline constexpr std::string_view kCurveId = "secp256r1";
inline constexpr std::string_view kPrfId = "HMAC-SHA256";
inline constexpr std::string_view kSignatureId = "Ed25519";
inline constexpr std::string_view kAeadId = "AES-256-GCM";
inline constexpr std::string_view kStreamCipherId = "AES-256-CTR";

inline constexpr std::size_t kPrfOutputSize = 32;
inline constexpr std::size_t kPrfPlusMaxOutput = 255 * kPrfOutputSize;
inline constexpr std::size_t kPrfKeyMaxSize = 64;
inline constexpr uint32_t kDefaultKdfIterations = 10000;
inline constexpr std::size_t kPointSize = 33;
inline constexpr std::size_t kScalarSize = 32;
inline constexpr std::size_t kAeadTagSize = 16;
inline constexpr std::size_t kSignatureSize = 64;

using Nonce12 = std::array<uint8_t, 12>;
using Signature = std::array<uint8_t, kSignatureSize>;

class PrfKey {
 public:
  /// Accepts 1..=64 octets.
  explicit PrfKey(ByteView bytes);
  ByteView bytes() const { return bytes_; }

 private:
  Bytes bytes_;
};

/// HMAC-SHA256.
Block32 prf(const PrfKey& key, ByteView data);

/// IKEv2 prf+: T1 = prf(K, S | 0x01), Tn = prf(K, T(n-1) | S | n).
Bytes prf_plus(const PrfKey& key, ByteView data, std::size_t out_len);

class SymmetricKey {
 public:
  explicit SymmetricKey(ByteView bytes);
  SymmetricKey(const SymmetricKey&) = default;
  SymmetricKey& operator=(const SymmetricKey&) = default;
  ~SymmetricKey();

  static SymmetricKey random(RandomSource& rng);

  ByteView bytes() const { return bytes_; }
  const Block32& block() const { return bytes_; }
  bool operator==(const SymmetricKey& other) const;

 private:
  Block32 bytes_{};
};

/// PBKDF2-HMAC-SHA256 to 32 octets.
SymmetricKey kdf_stretch(ByteView secret, ByteView salt, uint32_t iterations = kDefaultKdfIterations);

/// Element of Z_n, n the secp256r1 group order. Zero is representable; operations that need a
/// nonzero scalar check at their boundary.
class Scalar {
 public:
  Scalar() = default;
  Scalar(const Scalar&) = default;
  Scalar& operator=(const Scalar&) = default;
  ~Scalar();

  static Scalar zero() { return Scalar(); }
  static Scalar from_u64(uint64_t v);
  /// Uniform in [1, n-1].
  static Scalar random_nonzero(RandomSource& rng);
  /// Exactly 32 big-endian octets strictly below n; InvalidScalar otherwise.
  static Scalar from_bytes(ByteView bytes);
  /// Any octet string interpreted big-endian and reduced mod n. Never fails.
  static Scalar reduce(ByteView bytes);

  const Block32& to_bytes() const { return value_; }
  bool is_zero() const;

  Scalar operator+(const Scalar& rhs) const;
  Scalar operator-(const Scalar& rhs) const;
  Scalar operator*(const Scalar& rhs) const;
  Scalar operator-() const;
  /// InvalidScalar for zero.
  Scalar inverse() const;

  bool operator==(const Scalar& other) const { return value_ == other.value_; }

  /// Overwrites the value with zeros.
  void wipe();

 private:
  explicit Scalar(const Block32& v) : value_(v) {}
  Block32 value_{};
};

/// Point on secp256r1 with SEC1 compressed encoding. The identity encodes as 33 zero octets.
class Point {
 public:
  Point();
  Point(const Point& other);
  Point& operator=(const Point& other);
  Point(Point&&) noexcept;
  Point& operator=(Point&&) noexcept;
  ~Point();

  static Point generator();
  static Point identity() { return Point(); }
  /// InvalidPoint when the octets are not a canonical on-curve encoding.
  static Point decode(ByteView bytes);
  /// Deterministic point with unknown discrete log relative to G (try-and-increment).
  static Point hash_to_curve(std::string_view tag);

  std::array<uint8_t, kPointSize> encode() const;
  bool is_identity() const;

  Point operator+(const Point& rhs) const;
  Point operator-() const;
  Point operator-(const Point& rhs) const { return *this + (-rhs); }
  friend Point operator*(const Scalar& k, const Point& p);

  bool operator==(const Point& other) const;

 private:
  struct Deleter {
    void operator()(ec_point_st* p) const;
  };
  std::unique_ptr<ec_point_st, Deleter> point_;
};

Point operator*(const Scalar& k, const Point& p);

struct EcdheKeyPair {
  Scalar secret;
  Point public_point;
};

EcdheKeyPair ecdhe_keypair(RandomSource& rng);

/// my_scalar * peer_point; InvalidPeerPoint for the identity, InvalidScalar for zero.
Point dh(const Scalar& my_scalar, const Point& peer_point);

/// AES-256-GCM; output is ciphertext || 16-octet tag.
Bytes enc_auth(const SymmetricKey& key, const Nonce12& nonce, ByteView plaintext, ByteView aad);
/// AuthenticationFailed on any tag mismatch.
Bytes dec_auth(const SymmetricKey& key, const Nonce12& nonce, ByteView ciphertext, ByteView aad);

/// AES-256-CTR keystream XOR. No integrity: decryption under any key yields some plaintext.
Bytes enc_plain(const SymmetricKey& key, const Nonce12& nonce, ByteView plaintext);
Bytes dec_plain(const SymmetricKey& key, const Nonce12& nonce, ByteView ciphertext);

class VerifyKey {
 public:
  static VerifyKey from_bytes(ByteView bytes);
  const std::array<uint8_t, 32>& bytes() const { return bytes_; }
  bool operator==(const VerifyKey&) const = default;

 private:
  std::array<uint8_t, 32> bytes_{};
};

class SigningKey {
 public:
  static SigningKey generate(RandomSource& rng);
  static SigningKey from_seed(ByteView seed);

  const std::array<uint8_t, 32>& seed() const { return seed_; }
  const VerifyKey& verify_key() const { return verify_key_; }

 private:
  std::array<uint8_t, 32> seed_{};
  VerifyKey verify_key_;
};

/// Ed25519 (deterministic).
Signature sign(const SigningKey& key, ByteView data);
/// False for any mismatch; MalformedSignature when `signature` is not 64 octets.
bool verify(const VerifyKey& key, ByteView data, ByteView signature);

struct TokenSeed {
  Bytes seed;
  uint32_t step_seconds = 30;
  uint32_t digits = 8;

  void validate() const;
  bool operator==(const TokenSeed&) const = default;
};

/// Time-step token: dynamic truncation of prf(seed, floor(now / step) as 8 octets).
std::string totp(const TokenSeed& seed, int64_t now_seconds);

/// First 8 hex characters of prf("FP", secret). Safe to print.
std::string fingerprint(ByteView secret);

}  // namespace locathe
