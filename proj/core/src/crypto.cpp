#include "locathe/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstring>

#include "locathe/error.hpp"

namespace locathe {
namespace {

struct BnDeleter {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

[[noreturn]] void openssl_failure(const char* what) {
  throw std::runtime_error(std::string("openssl failure: ") + what);
}

void check(int rc, const char* what) {
  if (rc != 1) openssl_failure(what);
}

struct Curve {
  EC_GROUP* group = nullptr;
  BIGNUM* order = nullptr;
  EC_POINT* infinity = nullptr;

  Curve() {
    group = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
    if (group == nullptr) openssl_failure("EC_GROUP_new_by_curve_name");
    order = BN_new();
    check(EC_GROUP_get_order(group, order, nullptr), "EC_GROUP_get_order");
    infinity = EC_POINT_new(group);
    check(EC_POINT_set_to_infinity(group, infinity), "EC_POINT_set_to_infinity");
  }
};

// Read-only after construction; OpenSSL group objects are safe for concurrent reads.
const Curve& curve() {
  static const Curve instance;
  return instance;
}

BnPtr to_bn(ByteView bytes) {
  BnPtr bn(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
  if (!bn) openssl_failure("BN_bin2bn");
  return bn;
}

Block32 from_bn(const BIGNUM* bn) {
  Block32 out{};
  if (BN_bn2binpad(bn, out.data(), static_cast<int>(out.size())) != 32) openssl_failure("BN_bn2binpad");
  return out;
}

BnCtxPtr new_ctx() {
  BnCtxPtr ctx(BN_CTX_new());
  if (!ctx) openssl_failure("BN_CTX_new");
  return ctx;
}

EC_POINT* new_point() {
  EC_POINT* p = EC_POINT_new(curve().group);
  if (p == nullptr) openssl_failure("EC_POINT_new");
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// prf / prf+ / kdf

PrfKey::PrfKey(ByteView bytes) : bytes_(bytes.begin(), bytes.end()) {
  if (bytes_.empty() || bytes_.size() > kPrfKeyMaxSize)
    throw Error(ErrorCode::InvalidKey, "prf key must be 1..64 octets");
}

Block32 prf(const PrfKey& key, ByteView data) {
  Block32 out{};
  unsigned int len = 0;
  auto k = key.bytes();
  if (HMAC(EVP_sha256(), k.data(), static_cast<int>(k.size()), data.data(), data.size(), out.data(),
           &len) == nullptr ||
      len != out.size()) {
    openssl_failure("HMAC");
  }
  return out;
}

Bytes prf_plus(const PrfKey& key, ByteView data, std::size_t out_len) {
  if (out_len > kPrfPlusMaxOutput) throw Error(ErrorCode::LengthTooLarge, "prf+ output above 255 blocks");
  Bytes out;
  out.reserve(out_len + kPrfOutputSize);
  Bytes block_input;
  Block32 previous{};
  for (unsigned counter = 1; out.size() < out_len; ++counter) {
    block_input.clear();
    if (counter > 1) append(block_input, previous);
    append(block_input, data);
    block_input.push_back(static_cast<uint8_t>(counter));
    previous = prf(key, block_input);
    append(out, previous);
  }
  out.resize(out_len);
  return out;
}

SymmetricKey::SymmetricKey(ByteView bytes) {
  if (bytes.size() != bytes_.size()) throw Error(ErrorCode::InvalidKey, "symmetric key must be 32 octets");
  std::copy(bytes.begin(), bytes.end(), bytes_.begin());
}

SymmetricKey::~SymmetricKey() { OPENSSL_cleanse(bytes_.data(), bytes_.size()); }

SymmetricKey SymmetricKey::random(RandomSource& rng) {
  Block32 b{};
  rng.fill(b);
  return SymmetricKey(b);
}

bool SymmetricKey::operator==(const SymmetricKey& other) const {
  return constant_time_equal(bytes_, other.bytes_);
}

SymmetricKey kdf_stretch(ByteView secret, ByteView salt, uint32_t iterations) {
  if (secret.empty()) throw Error(ErrorCode::EmptySecret, "kdf secret is empty");
  if (iterations == 0) throw Error(ErrorCode::InvalidKey, "kdf iterations must be positive");
  Block32 out{};
  check(PKCS5_PBKDF2_HMAC(reinterpret_cast<const char*>(secret.data()), static_cast<int>(secret.size()),
                          salt.data(), static_cast<int>(salt.size()), static_cast<int>(iterations),
                          EVP_sha256(), static_cast<int>(out.size()), out.data()),
        "PKCS5_PBKDF2_HMAC");
  SymmetricKey key(out);
  OPENSSL_cleanse(out.data(), out.size());
  return key;
}

// ---------------------------------------------------------------------------
// Scalars

Scalar::~Scalar() { wipe(); }

void Scalar::wipe() { OPENSSL_cleanse(value_.data(), value_.size()); }

Scalar Scalar::from_u64(uint64_t v) {
  Block32 b{};
  for (int i = 0; i < 8; ++i) b[31 - i] = static_cast<uint8_t>(v >> (8 * i));
  return Scalar(b);
}

Scalar Scalar::random_nonzero(RandomSource& rng) {
  Block32 candidate{};
  for (;;) {
    rng.fill(candidate);
    auto bn = to_bn(candidate);
    if (!BN_is_zero(bn.get()) && BN_cmp(bn.get(), curve().order) < 0) return Scalar(candidate);
  }
}

Scalar Scalar::from_bytes(ByteView bytes) {
  if (bytes.size() != kScalarSize) throw Error(ErrorCode::InvalidScalar, "scalar must be 32 octets");
  auto bn = to_bn(bytes);
  if (BN_cmp(bn.get(), curve().order) >= 0) throw Error(ErrorCode::InvalidScalar, "scalar not below group order");
  Block32 b{};
  std::copy(bytes.begin(), bytes.end(), b.begin());
  return Scalar(b);
}

Scalar Scalar::reduce(ByteView bytes) {
  auto bn = to_bn(bytes);
  auto ctx = new_ctx();
  BnPtr r(BN_new());
  check(BN_nnmod(r.get(), bn.get(), curve().order, ctx.get()), "BN_nnmod");
  return Scalar(from_bn(r.get()));
}

bool Scalar::is_zero() const { return is_all_zero(value_); }

Scalar Scalar::operator+(const Scalar& rhs) const {
  auto a = to_bn(value_), b = to_bn(rhs.value_);
  auto ctx = new_ctx();
  BnPtr r(BN_new());
  check(BN_mod_add(r.get(), a.get(), b.get(), curve().order, ctx.get()), "BN_mod_add");
  return Scalar(from_bn(r.get()));
}

Scalar Scalar::operator-(const Scalar& rhs) const {
  auto a = to_bn(value_), b = to_bn(rhs.value_);
  auto ctx = new_ctx();
  BnPtr r(BN_new());
  check(BN_mod_sub(r.get(), a.get(), b.get(), curve().order, ctx.get()), "BN_mod_sub");
  return Scalar(from_bn(r.get()));
}

Scalar Scalar::operator*(const Scalar& rhs) const {
  auto a = to_bn(value_), b = to_bn(rhs.value_);
  auto ctx = new_ctx();
  BnPtr r(BN_new());
  check(BN_mod_mul(r.get(), a.get(), b.get(), curve().order, ctx.get()), "BN_mod_mul");
  return Scalar(from_bn(r.get()));
}

Scalar Scalar::operator-() const { return Scalar() - *this; }

Scalar Scalar::inverse() const {
  if (is_zero()) throw Error(ErrorCode::InvalidScalar, "zero has no inverse");
  auto a = to_bn(value_);
  auto ctx = new_ctx();
  BnPtr r(BN_mod_inverse(nullptr, a.get(), curve().order, ctx.get()));
  if (!r) openssl_failure("BN_mod_inverse");
  return Scalar(from_bn(r.get()));
}

// ---------------------------------------------------------------------------
// Points

void Point::Deleter::operator()(ec_point_st* p) const { EC_POINT_free(p); }

Point::Point() : point_(new_point()) { check(EC_POINT_set_to_infinity(curve().group, point_.get()), "infinity"); }

Point::Point(const Point& other) : point_(EC_POINT_dup(other.point_ ? other.point_.get() : curve().infinity, curve().group)) {
  if (!point_) openssl_failure("EC_POINT_dup");
}

Point& Point::operator=(const Point& other) {
  if (this != &other) {
    Point copy(other);
    point_ = std::move(copy.point_);
  }
  return *this;
}

Point::Point(Point&& other) noexcept = default;
Point& Point::operator=(Point&& other) noexcept = default;
Point::~Point() = default;

Point Point::generator() {
  Point g;
  check(EC_POINT_copy(g.point_.get(), EC_GROUP_get0_generator(curve().group)), "EC_POINT_copy");
  return g;
}

Point Point::decode(ByteView bytes) {
  if (bytes.size() != kPointSize) throw Error(ErrorCode::InvalidPoint, "point encoding must be 33 octets");
  if (is_all_zero(bytes)) return Point();
  if (bytes[0] != 0x02 && bytes[0] != 0x03) throw Error(ErrorCode::InvalidPoint, "not a compressed encoding");
  Point p;
  auto ctx = new_ctx();
  if (EC_POINT_oct2point(curve().group, p.point_.get(), bytes.data(), bytes.size(), ctx.get()) != 1)
    throw Error(ErrorCode::InvalidPoint, "not a point on secp256r1");
  if (EC_POINT_is_on_curve(curve().group, p.point_.get(), ctx.get()) != 1)
    throw Error(ErrorCode::InvalidPoint, "point off curve");
  auto canonical = p.encode();
  if (!std::equal(canonical.begin(), canonical.end(), bytes.begin()))
    throw Error(ErrorCode::InvalidPoint, "non-canonical encoding");
  return p;
}

Point Point::hash_to_curve(std::string_view tag) {
  auto ctx = new_ctx();
  Point p;
  for (uint32_t counter = 0;; ++counter) {
    Bytes input = to_bytes(tag);
    append_u32_be(input, counter);
    Block32 digest{};
    SHA256(input.data(), input.size(), digest.data());
    auto x = to_bn(digest);
    // set_compressed_coordinates fails when x^3 + ax + b is a non-residue or x >= p.
    if (EC_POINT_set_compressed_coordinates(curve().group, p.point_.get(), x.get(), 0, ctx.get()) == 1 &&
        EC_POINT_is_on_curve(curve().group, p.point_.get(), ctx.get()) == 1) {
      return p;
    }
  }
}

std::array<uint8_t, kPointSize> Point::encode() const {
  std::array<uint8_t, kPointSize> out{};
  if (is_identity()) return out;
  auto ctx = new_ctx();
  std::size_t n = EC_POINT_point2oct(curve().group, point_.get(), POINT_CONVERSION_COMPRESSED, out.data(),
                                     out.size(), ctx.get());
  if (n != kPointSize) openssl_failure("EC_POINT_point2oct");
  return out;
}

bool Point::is_identity() const {
  return !point_ || EC_POINT_is_at_infinity(curve().group, point_.get()) == 1;
}

Point Point::operator+(const Point& rhs) const {
  Point r;
  auto ctx = new_ctx();
  check(EC_POINT_add(curve().group, r.point_.get(), point_ ? point_.get() : curve().infinity,
                     rhs.point_ ? rhs.point_.get() : curve().infinity, ctx.get()),
        "EC_POINT_add");
  return r;
}

Point Point::operator-() const {
  Point r(*this);
  auto ctx = new_ctx();
  check(EC_POINT_invert(curve().group, r.point_.get(), ctx.get()), "EC_POINT_invert");
  return r;
}

Point operator*(const Scalar& k, const Point& p) {
  Point r;
  auto ctx = new_ctx();
  auto bn = to_bn(k.to_bytes());
  check(EC_POINT_mul(curve().group, r.point_.get(), nullptr, p.point_ ? p.point_.get() : curve().infinity,
                     bn.get(), ctx.get()),
        "EC_POINT_mul");
  return r;
}

bool Point::operator==(const Point& other) const {
  auto ctx = new_ctx();
  return EC_POINT_cmp(curve().group, point_ ? point_.get() : curve().infinity,
                      other.point_ ? other.point_.get() : curve().infinity, ctx.get()) == 0;
}

EcdheKeyPair ecdhe_keypair(RandomSource& rng) {
  Scalar k = Scalar::random_nonzero(rng);
  Point pub = k * Point::generator();
  return {k, pub};
}

Point dh(const Scalar& my_scalar, const Point& peer_point) {
  if (peer_point.is_identity()) throw Error(ErrorCode::InvalidPeerPoint, "peer point is the identity");
  if (my_scalar.is_zero()) throw Error(ErrorCode::InvalidScalar, "zero scalar");
  return my_scalar * peer_point;
}

// ---------------------------------------------------------------------------
// Symmetric encryption

Bytes enc_auth(const SymmetricKey& key, const Nonce12& nonce, ByteView plaintext, ByteView aad) {
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("EVP_CIPHER_CTX_new");
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bytes().data(), nonce.data()), "gcm init");
  int len = 0;
  if (!aad.empty()) check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())), "gcm aad");
  Bytes out(plaintext.size() + kAeadTagSize);
  if (!plaintext.empty())
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())),
          "gcm update");
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + plaintext.size(), &len), "gcm final");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagSize, out.data() + plaintext.size()),
        "gcm tag");
  return out;
}

Bytes dec_auth(const SymmetricKey& key, const Nonce12& nonce, ByteView ciphertext, ByteView aad) {
  if (ciphertext.size() < kAeadTagSize) throw Error(ErrorCode::AuthenticationFailed, "ciphertext shorter than tag");
  std::size_t body = ciphertext.size() - kAeadTagSize;
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("EVP_CIPHER_CTX_new");
  check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bytes().data(), nonce.data()), "gcm init");
  int len = 0;
  if (!aad.empty()) check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())), "gcm aad");
  Bytes out(body);
  if (body > 0)
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(), static_cast<int>(body)), "gcm update");
  Bytes tag(ciphertext.begin() + static_cast<std::ptrdiff_t>(body), ciphertext.end());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagSize, tag.data()), "gcm set tag");
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + body, &len) != 1) {
    OPENSSL_cleanse(out.data(), out.size());
    throw Error(ErrorCode::AuthenticationFailed, "tag mismatch");
  }
  return out;
}

namespace {

Bytes ctr_xor(const SymmetricKey& key, const Nonce12& nonce, ByteView input) {
  std::array<uint8_t, 16> iv{};
  std::copy(nonce.begin(), nonce.end(), iv.begin());
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx) openssl_failure("EVP_CIPHER_CTX_new");
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.bytes().data(), iv.data()), "ctr init");
  Bytes out(input.size());
  int len = 0;
  if (!input.empty())
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, input.data(), static_cast<int>(input.size())), "ctr update");
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &len), "ctr final");
  return out;
}

}  // namespace

Bytes enc_plain(const SymmetricKey& key, const Nonce12& nonce, ByteView plaintext) {
  return ctr_xor(key, nonce, plaintext);
}

Bytes dec_plain(const SymmetricKey& key, const Nonce12& nonce, ByteView ciphertext) {
  return ctr_xor(key, nonce, ciphertext);
}

// ---------------------------------------------------------------------------
// Signatures

VerifyKey VerifyKey::from_bytes(ByteView bytes) {
  if (bytes.size() != 32) throw Error(ErrorCode::InvalidKey, "Ed25519 public key must be 32 octets");
  VerifyKey k;
  std::copy(bytes.begin(), bytes.end(), k.bytes_.begin());
  return k;
}

SigningKey SigningKey::from_seed(ByteView seed) {
  if (seed.size() != 32) throw Error(ErrorCode::InvalidKey, "Ed25519 seed must be 32 octets");
  SigningKey k;
  std::copy(seed.begin(), seed.end(), k.seed_.begin());
  PkeyPtr pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size()));
  if (!pkey) openssl_failure("EVP_PKEY_new_raw_private_key");
  std::array<uint8_t, 32> pub{};
  std::size_t len = pub.size();
  check(EVP_PKEY_get_raw_public_key(pkey.get(), pub.data(), &len), "EVP_PKEY_get_raw_public_key");
  k.verify_key_ = VerifyKey::from_bytes(pub);
  return k;
}

SigningKey SigningKey::generate(RandomSource& rng) {
  auto seed = rng.array<32>();
  auto key = from_seed(seed);
  OPENSSL_cleanse(seed.data(), seed.size());
  return key;
}

Signature sign(const SigningKey& key, ByteView data) {
  PkeyPtr pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, key.seed().data(), key.seed().size()));
  if (!pkey) openssl_failure("EVP_PKEY_new_raw_private_key");
  MdCtxPtr ctx(EVP_MD_CTX_new());
  check(EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()), "EVP_DigestSignInit");
  Signature sig{};
  std::size_t len = sig.size();
  check(EVP_DigestSign(ctx.get(), sig.data(), &len, data.data(), data.size()), "EVP_DigestSign");
  return sig;
}

bool verify(const VerifyKey& key, ByteView data, ByteView signature) {
  if (signature.size() != kSignatureSize) throw Error(ErrorCode::MalformedSignature, "signature must be 64 octets");
  PkeyPtr pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, key.bytes().data(), key.bytes().size()));
  if (!pkey) return false;
  MdCtxPtr ctx(EVP_MD_CTX_new());
  check(EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()), "EVP_DigestVerifyInit");
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), data.data(), data.size()) == 1;
}

// ---------------------------------------------------------------------------
// Token authenticator

void TokenSeed::validate() const {
  if (seed.size() < 20 || seed.size() > 64) throw Error(ErrorCode::InvalidKey, "token seed must be 20..64 octets");
  if (step_seconds == 0) throw Error(ErrorCode::InvalidKey, "token step must be positive");
  if (digits < 6 || digits > 9) throw Error(ErrorCode::InvalidKey, "token digits must be 6..9");
}

std::string totp(const TokenSeed& seed, int64_t now_seconds) {
  seed.validate();
  if (now_seconds < 0) throw Error(ErrorCode::Format, "token time before epoch");
  uint64_t step = static_cast<uint64_t>(now_seconds) / seed.step_seconds;
  Bytes counter;
  append_u64_be(counter, step);
  Block32 mac = prf(PrfKey(seed.seed), counter);
  unsigned offset = mac[31] & 0x0F;
  uint32_t code = (uint32_t{mac[offset]} & 0x7F) << 24 | uint32_t{mac[offset + 1]} << 16 |
                  uint32_t{mac[offset + 2]} << 8 | uint32_t{mac[offset + 3]};
  uint32_t modulus = 1;
  for (uint32_t i = 0; i < seed.digits; ++i) modulus *= 10;
  std::string digits = std::to_string(code % modulus);
  return std::string(seed.digits - digits.size(), '0') + digits;
}

std::string fingerprint(ByteView secret) {
  Block32 fp = prf(PrfKey(view("FP")), secret);
  return to_hex(ByteView(fp).first(4));
}

}  // namespace locathe
