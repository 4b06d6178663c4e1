#pragma once

#include <compare>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locathe/bytes.hpp"
#include "locathe/crypto.hpp"
#include "locathe/random.hpp"
#include "locathe/time.hpp"

namespace locathe {

/// An attribute is owned by exactly one authority; `authority:name` in text form.
struct Attribute {
  std::string authority;
  std::string name;

  static Attribute parse(std::string_view text);
  std::string to_string() const { return authority + ":" + name; }
  auto operator<=>(const Attribute&) const = default;
};

class AttributeSet {
 public:
  AttributeSet() = default;
  AttributeSet(std::initializer_list<Attribute> attrs);
  template <typename It>
  AttributeSet(It first, It last) : entries_(first, last) {}

  /// Comma-separated `authority:name` list; empty text yields the empty set.
  static AttributeSet parse(std::string_view text);

  bool insert(Attribute attr) { return entries_.insert(std::move(attr)).second; }
  bool contains(const Attribute& attr) const { return entries_.count(attr) != 0; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::string to_string() const;

  bool operator==(const AttributeSet&) const = default;

 private:
  std::set<Attribute> entries_;
};

struct PolicyNode {
  enum class Kind : uint8_t { And = 1, Or = 2, Threshold = 3, Leaf = 4 };

  Kind kind = Kind::Leaf;
  uint32_t threshold = 0;  // THRESHOLD only
  std::vector<PolicyNode> children;
  Attribute attribute;  // LEAF only

  bool operator==(const PolicyNode&) const = default;
};

PolicyNode leaf(std::string authority, std::string name);
PolicyNode all_of(std::vector<PolicyNode> children);
PolicyNode any_of(std::vector<PolicyNode> children);
PolicyNode threshold(uint32_t k, std::vector<PolicyNode> children);

/// Monotone access tree. Text form: AND(a:x, OR(b:y, c:z), THRESHOLD(2, a:p, a:q, b:r)).
class AccessPolicy {
 public:
  /// InvalidPolicy on empty gates, k outside 1..children, or empty attribute names.
  explicit AccessPolicy(PolicyNode root);

  static AccessPolicy parse(std::string_view text);
  std::string to_string() const;

  const PolicyNode& root() const { return root_; }
  /// Leaves in depth-first order; ciphertext share material follows this order.
  std::vector<Attribute> leaves() const;

  /// Prefix-notation token stream.
  Bytes encode() const;
  static AccessPolicy decode(ByteView bytes);

  bool operator==(const AccessPolicy&) const = default;

 private:
  PolicyNode root_;
};

/// LEAF = membership, AND = all, OR = any, THRESHOLD(k) = at least k.
bool policy_satisfied(const AccessPolicy& policy, const AttributeSet& attrs);

struct AuthorityKeys {
  std::string authority_id;
  Bytes master_secret;
  /// Encoded AuthorityPublicParams.
  Bytes public_params;
};

struct AttributePublicKey {
  Point k;
  Point t;
  bool operator==(const AttributePublicKey&) const = default;
};

struct AuthorityPublicParams {
  std::string authority_id;
  std::map<std::string, AttributePublicKey> attributes;

  Bytes encode() const;
  static AuthorityPublicParams decode(ByteView bytes);
  bool operator==(const AuthorityPublicParams&) const = default;
};

/// Public view of every registered authority, as consumed by encrypt.
struct AbePublicParams {
  std::map<std::string, AuthorityPublicParams> authorities;
};

struct UserAbeKey {
  std::string user_gid;
  std::string authority_id;
  std::map<Attribute, Scalar> shares;
  Timestamp issued_at{};
  Timestamp expires_at{};

  AttributeSet attributes() const;
  bool valid_at(Timestamp now) const { return issued_at <= now && now < expires_at; }

  Bytes encode() const;
  static UserAbeKey decode(ByteView bytes);
};

struct AbeCiphertext {
  AccessPolicy policy;
  Bytes body;
  std::vector<Bytes> leaf_shares;

  Bytes encode() const;
  static AbeCiphertext decode(ByteView bytes);
};

/// Multi-authority CP-ABE contract. Implementations must be stateless: all key material lives
/// in the values passed in.
class AbeScheme {
 public:
  virtual ~AbeScheme() = default;

  virtual std::string_view name() const = 0;
  virtual AuthorityKeys authority_setup(const std::string& authority_id, RandomSource& rng) const = 0;
  /// Makes `attribute_name` encryptable under this authority. Idempotent.
  virtual void publish_attribute(AuthorityKeys& authority, const std::string& attribute_name) const = 0;
  /// ForeignAttribute when an attribute names another authority. Publishes granted attributes.
  virtual UserAbeKey keygen(AuthorityKeys& authority, const std::string& user_gid, const AttributeSet& attrs,
                            Timestamp issued_at, Duration validity) const = 0;
  /// UnknownAuthority / UnknownAttribute when a leaf has no published key.
  virtual AbeCiphertext encrypt(const AbePublicParams& params, const AccessPolicy& policy, ByteView plaintext,
                                RandomSource& rng) const = 0;
  /// PolicyNotSatisfied, or KeyExpired when only expired keys would have satisfied the policy.
  virtual Bytes decrypt(std::span<const UserAbeKey> keys, const AbeCiphertext& ct, Timestamp now) const = 0;
};

/// Desk-scale backend. Secret sharing over Z_n (n = secp256r1 order) with each leaf share
/// hidden ElGamal-style under the attribute's public key; a zero-sharing scaled by H(gid)
/// binds every share to one user identity, so keys of different users do not combine.
class ReferenceAbe final : public AbeScheme {
 public:
  std::string_view name() const override { return "reference-lsss-p256"; }
  AuthorityKeys authority_setup(const std::string& authority_id, RandomSource& rng) const override;
  void publish_attribute(AuthorityKeys& authority, const std::string& attribute_name) const override;
  UserAbeKey keygen(AuthorityKeys& authority, const std::string& user_gid, const AttributeSet& attrs,
                    Timestamp issued_at, Duration validity) const override;
  AbeCiphertext encrypt(const AbePublicParams& params, const AccessPolicy& policy, ByteView plaintext,
                        RandomSource& rng) const override;
  Bytes decrypt(std::span<const UserAbeKey> keys, const AbeCiphertext& ct, Timestamp now) const override;
};

const AbeScheme& default_abe_scheme();

/// Authority records keyed by id. Read-mostly; writers (setup/remove) must be externally
/// serialized with respect to readers.
class AuthorityRegistry {
 public:
  /// DuplicateAuthority if `authority_id` exists.
  AuthorityKeys& setup(const AbeScheme& scheme, const std::string& authority_id, RandomSource& rng);
  void insert(AuthorityKeys keys);
  void remove(const std::string& authority_id);

  bool contains(const std::string& authority_id) const { return authorities_.count(authority_id) != 0; }
  /// UnknownAuthority when absent.
  AuthorityKeys& at(const std::string& authority_id);
  const AuthorityKeys& at(const std::string& authority_id) const;

  AbePublicParams public_params() const;
  const std::map<std::string, AuthorityKeys>& all() const { return authorities_; }

 private:
  std::map<std::string, AuthorityKeys> authorities_;
};

}  // namespace locathe
