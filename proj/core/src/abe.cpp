#include "locathe/abe.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

#include "locathe/error.hpp"

namespace locathe {
namespace {

constexpr uint8_t kAbeFormat = 0x01;
constexpr std::size_t kMaxPolicyDepth = 32;
constexpr std::size_t kLeafShareSize = 3 * kPointSize;

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '@';
}

bool is_ident(std::string_view s) { return !s.empty() && std::all_of(s.begin(), s.end(), is_ident_char); }

void validate_node(const PolicyNode& node, std::size_t depth) {
  if (depth > kMaxPolicyDepth) throw Error(ErrorCode::InvalidPolicy, "policy nesting too deep");
  switch (node.kind) {
    case PolicyNode::Kind::Leaf:
      if (!is_ident(node.attribute.authority) || !is_ident(node.attribute.name))
        throw Error(ErrorCode::InvalidPolicy, "leaf needs authority and attribute identifiers");
      if (!node.children.empty()) throw Error(ErrorCode::InvalidPolicy, "leaf with children");
      return;
    case PolicyNode::Kind::Threshold:
      if (node.threshold < 1 || node.threshold > node.children.size())
        throw Error(ErrorCode::InvalidPolicy, "threshold k outside 1..children");
      [[fallthrough]];
    case PolicyNode::Kind::And:
    case PolicyNode::Kind::Or:
      if (node.children.empty()) throw Error(ErrorCode::InvalidPolicy, "gate without children");
      if (node.children.size() > 0xFFFF) throw Error(ErrorCode::InvalidPolicy, "gate fan-out too large");
      for (const auto& c : node.children) validate_node(c, depth + 1);
      return;
  }
  throw Error(ErrorCode::InvalidPolicy, "unknown node kind");
}

void collect_leaves(const PolicyNode& node, std::vector<Attribute>& out) {
  if (node.kind == PolicyNode::Kind::Leaf) {
    out.push_back(node.attribute);
    return;
  }
  for (const auto& c : node.children) collect_leaves(c, out);
}

std::size_t leaf_count(const PolicyNode& node) {
  if (node.kind == PolicyNode::Kind::Leaf) return 1;
  std::size_t n = 0;
  for (const auto& c : node.children) n += leaf_count(c);
  return n;
}

void write_node(const PolicyNode& node, std::ostringstream& os) {
  switch (node.kind) {
    case PolicyNode::Kind::Leaf:
      os << node.attribute.to_string();
      return;
    case PolicyNode::Kind::And:
      os << "AND(";
      break;
    case PolicyNode::Kind::Or:
      os << "OR(";
      break;
    case PolicyNode::Kind::Threshold:
      os << "THRESHOLD(" << node.threshold << ", ";
      break;
  }
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i > 0) os << ", ";
    write_node(node.children[i], os);
  }
  os << ")";
}

class PolicyParser {
 public:
  explicit PolicyParser(std::string_view text) : text_(text) {}

  PolicyNode parse() {
    auto node = parse_node(0);
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::InvalidPolicy, what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  PolicyNode parse_node(std::size_t depth) {
    if (depth > kMaxPolicyDepth) fail("policy nesting too deep");
    std::string word = ident();
    if (consume(':')) return leaf(std::move(word), ident());

    std::string upper = word;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](char c) { return static_cast<char>(std::toupper(c)); });
    PolicyNode node;
    if (upper == "AND") {
      node.kind = PolicyNode::Kind::And;
    } else if (upper == "OR") {
      node.kind = PolicyNode::Kind::Or;
    } else if (upper == "THRESHOLD") {
      node.kind = PolicyNode::Kind::Threshold;
    } else {
      fail("unknown gate '" + word + "'");
    }
    if (!consume('(')) fail("expected '('");
    if (node.kind == PolicyNode::Kind::Threshold) {
      std::string k = ident();
      if (!std::all_of(k.begin(), k.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
          k.size() > 5)
        fail("threshold k must be a small integer");
      node.threshold = static_cast<uint32_t>(std::stoul(k));
      if (!consume(',')) fail("expected ',' after threshold");
    }
    do {
      node.children.push_back(parse_node(depth + 1));
    } while (consume(','));
    if (!consume(')')) fail("expected ')'");
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void encode_node(const PolicyNode& node, Bytes& out) {
  out.push_back(static_cast<uint8_t>(node.kind));
  switch (node.kind) {
    case PolicyNode::Kind::Leaf:
      append_prefixed16(out, view(node.attribute.authority));
      append_prefixed16(out, view(node.attribute.name));
      return;
    case PolicyNode::Kind::Threshold:
      append_u16_be(out, static_cast<uint16_t>(node.threshold));
      [[fallthrough]];
    case PolicyNode::Kind::And:
    case PolicyNode::Kind::Or:
      append_u16_be(out, static_cast<uint16_t>(node.children.size()));
      for (const auto& c : node.children) encode_node(c, out);
      return;
  }
}

std::string as_string(ByteView b) { return std::string(b.begin(), b.end()); }

PolicyNode decode_node(Reader& r, std::size_t depth) {
  if (depth > kMaxPolicyDepth) throw Error(ErrorCode::InvalidPolicy, "policy nesting too deep");
  PolicyNode node;
  uint8_t tag = r.u8();
  switch (tag) {
    case static_cast<uint8_t>(PolicyNode::Kind::Leaf):
      node.kind = PolicyNode::Kind::Leaf;
      node.attribute.authority = as_string(r.prefixed16());
      node.attribute.name = as_string(r.prefixed16());
      return node;
    case static_cast<uint8_t>(PolicyNode::Kind::Threshold):
      node.kind = PolicyNode::Kind::Threshold;
      node.threshold = r.u16();
      break;
    case static_cast<uint8_t>(PolicyNode::Kind::And):
      node.kind = PolicyNode::Kind::And;
      break;
    case static_cast<uint8_t>(PolicyNode::Kind::Or):
      node.kind = PolicyNode::Kind::Or;
      break;
    default:
      throw Error(ErrorCode::InvalidPolicy, "unknown policy token");
  }
  uint16_t count = r.u16();
  for (uint16_t i = 0; i < count; ++i) node.children.push_back(decode_node(r, depth + 1));
  return node;
}

bool node_satisfied(const PolicyNode& node, const AttributeSet& attrs) {
  switch (node.kind) {
    case PolicyNode::Kind::Leaf:
      return attrs.contains(node.attribute);
    case PolicyNode::Kind::And:
      return std::all_of(node.children.begin(), node.children.end(),
                         [&](const PolicyNode& c) { return node_satisfied(c, attrs); });
    case PolicyNode::Kind::Or:
      return std::any_of(node.children.begin(), node.children.end(),
                         [&](const PolicyNode& c) { return node_satisfied(c, attrs); });
    case PolicyNode::Kind::Threshold: {
      uint32_t hits = 0;
      for (const auto& c : node.children) {
        if (node_satisfied(c, attrs) && ++hits >= node.threshold) return true;
      }
      return false;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Linear secret sharing over Z_n

void share_secret(const PolicyNode& node, const Scalar& secret, RandomSource& rng, std::vector<Scalar>& leaf_shares) {
  switch (node.kind) {
    case PolicyNode::Kind::Leaf:
      leaf_shares.push_back(secret);
      return;
    case PolicyNode::Kind::And: {
      Scalar remainder = secret;
      for (std::size_t i = 0; i + 1 < node.children.size(); ++i) {
        Scalar part = Scalar::random_nonzero(rng);
        remainder = remainder - part;
        share_secret(node.children[i], part, rng, leaf_shares);
      }
      share_secret(node.children.back(), remainder, rng, leaf_shares);
      return;
    }
    case PolicyNode::Kind::Or:
      for (const auto& c : node.children) share_secret(c, secret, rng, leaf_shares);
      return;
    case PolicyNode::Kind::Threshold: {
      // f(x) = secret + a1 x + ... + a_{k-1} x^{k-1}; child i receives f(i).
      std::vector<Scalar> coeffs{secret};
      for (uint32_t i = 1; i < node.threshold; ++i) coeffs.push_back(Scalar::random_nonzero(rng));
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        Scalar x = Scalar::from_u64(i + 1);
        Scalar y = Scalar::zero();
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) y = y * x + *it;
        share_secret(node.children[i], y, rng, leaf_shares);
      }
      return;
    }
  }
}

using Coefficients = std::vector<std::pair<std::size_t, Scalar>>;

/// Reconstruction coefficients over the available leaves, or nullopt when unsatisfiable.
std::optional<Coefficients> reconstruction(const PolicyNode& node, const AttributeSet& available,
                                           std::size_t first_leaf) {
  switch (node.kind) {
    case PolicyNode::Kind::Leaf:
      if (!available.contains(node.attribute)) return std::nullopt;
      return Coefficients{{first_leaf, Scalar::from_u64(1)}};
    case PolicyNode::Kind::And: {
      Coefficients out;
      std::size_t leaf = first_leaf;
      for (const auto& c : node.children) {
        auto sub = reconstruction(c, available, leaf);
        if (!sub) return std::nullopt;
        out.insert(out.end(), sub->begin(), sub->end());
        leaf += leaf_count(c);
      }
      return out;
    }
    case PolicyNode::Kind::Or: {
      std::size_t leaf = first_leaf;
      for (const auto& c : node.children) {
        if (auto sub = reconstruction(c, available, leaf)) return sub;
        leaf += leaf_count(c);
      }
      return std::nullopt;
    }
    case PolicyNode::Kind::Threshold: {
      std::vector<std::pair<uint64_t, Coefficients>> chosen;
      std::size_t leaf = first_leaf;
      for (std::size_t i = 0; i < node.children.size() && chosen.size() < node.threshold; ++i) {
        if (auto sub = reconstruction(node.children[i], available, leaf)) chosen.emplace_back(i + 1, std::move(*sub));
        leaf += leaf_count(node.children[i]);
      }
      if (chosen.size() < node.threshold) return std::nullopt;
      Coefficients out;
      for (const auto& [xi, sub] : chosen) {
        // Lagrange basis at zero: prod_{j != i} x_j / (x_j - x_i).
        Scalar num = Scalar::from_u64(1), den = Scalar::from_u64(1);
        for (const auto& other : chosen) {
          if (other.first == xi) continue;
          Scalar xj = Scalar::from_u64(other.first);
          num = num * xj;
          den = den * (xj - Scalar::from_u64(xi));
        }
        Scalar lagrange = num * den.inverse();
        for (const auto& [index, c] : sub) out.emplace_back(index, c * lagrange);
      }
      return out;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reference backend derivations

const Point& blinding_base() {
  static const Point q = Point::hash_to_curve("locathe/abe/zero-share-base");
  return q;
}

Scalar attribute_scalar(const AuthorityKeys& authority, std::string_view label, const std::string& name) {
  Bytes data = to_bytes(label);
  append_prefixed16(data, view(name));
  return Scalar::reduce(prf(PrfKey(authority.master_secret), data));
}

Scalar gid_scalar(const std::string& gid) { return Scalar::reduce(prf(PrfKey(view("LOCATHE-ABE-GID")), view(gid))); }

SymmetricKey content_key(const Point& secret_point) {
  auto enc = secret_point.encode();
  return SymmetricKey(prf(PrfKey(enc), view("LOCATHE-ABE-CK")));
}

constexpr Nonce12 kBodyNonce{};

}  // namespace

// ---------------------------------------------------------------------------
// Attributes and policies

Attribute Attribute::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidPolicy, "attribute must be authority:name");
  Attribute a{std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
  auto trim = [](std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  trim(a.authority);
  trim(a.name);
  if (!is_ident(a.authority) || !is_ident(a.name)) throw Error(ErrorCode::InvalidPolicy, "bad attribute identifier");
  return a;
}

AttributeSet::AttributeSet(std::initializer_list<Attribute> attrs) : entries_(attrs) {}

AttributeSet AttributeSet::parse(std::string_view text) {
  AttributeSet out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (item.find_first_not_of(" \t") != std::string_view::npos) out.insert(Attribute::parse(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string AttributeSet::to_string() const {
  std::string out;
  for (const auto& a : entries_) {
    if (!out.empty()) out += ",";
    out += a.to_string();
  }
  return out;
}

PolicyNode leaf(std::string authority, std::string name) {
  PolicyNode n;
  n.kind = PolicyNode::Kind::Leaf;
  n.attribute = {std::move(authority), std::move(name)};
  return n;
}

PolicyNode all_of(std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind = PolicyNode::Kind::And;
  n.children = std::move(children);
  return n;
}

PolicyNode any_of(std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind = PolicyNode::Kind::Or;
  n.children = std::move(children);
  return n;
}

PolicyNode threshold(uint32_t k, std::vector<PolicyNode> children) {
  PolicyNode n;
  n.kind = PolicyNode::Kind::Threshold;
  n.threshold = k;
  n.children = std::move(children);
  return n;
}

AccessPolicy::AccessPolicy(PolicyNode root) : root_(std::move(root)) { validate_node(root_, 0); }

AccessPolicy AccessPolicy::parse(std::string_view text) { return AccessPolicy(PolicyParser(text).parse()); }

std::string AccessPolicy::to_string() const {
  std::ostringstream os;
  write_node(root_, os);
  return os.str();
}

std::vector<Attribute> AccessPolicy::leaves() const {
  std::vector<Attribute> out;
  collect_leaves(root_, out);
  return out;
}

Bytes AccessPolicy::encode() const {
  Bytes out;
  encode_node(root_, out);
  return out;
}

AccessPolicy AccessPolicy::decode(ByteView bytes) {
  Reader r(bytes);
  try {
    auto root = decode_node(r, 0);
    r.expect_done();
    return AccessPolicy(std::move(root));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidPolicy) throw;
    throw Error(ErrorCode::InvalidPolicy, e.what());
  }
}

bool policy_satisfied(const AccessPolicy& policy, const AttributeSet& attrs) {
  return node_satisfied(policy.root(), attrs);
}

// ---------------------------------------------------------------------------
// Serialization

Bytes AuthorityPublicParams::encode() const {
  Bytes out{kAbeFormat};
  append_prefixed16(out, view(authority_id));
  append_u16_be(out, static_cast<uint16_t>(attributes.size()));
  for (const auto& [name, key] : attributes) {
    append_prefixed16(out, view(name));
    append(out, key.k.encode());
    append(out, key.t.encode());
  }
  return out;
}

AuthorityPublicParams AuthorityPublicParams::decode(ByteView bytes) {
  Reader r(bytes);
  if (r.u8() != kAbeFormat) throw Error(ErrorCode::Format, "unsupported authority params format");
  AuthorityPublicParams p;
  p.authority_id = as_string(r.prefixed16());
  uint16_t count = r.u16();
  for (uint16_t i = 0; i < count; ++i) {
    std::string name = as_string(r.prefixed16());
    Point k = Point::decode(r.take(kPointSize));
    Point t = Point::decode(r.take(kPointSize));
    p.attributes.emplace(std::move(name), AttributePublicKey{std::move(k), std::move(t)});
  }
  r.expect_done();
  return p;
}

AttributeSet UserAbeKey::attributes() const {
  AttributeSet out;
  for (const auto& [attr, share] : shares) out.insert(attr);
  return out;
}

Bytes UserAbeKey::encode() const {
  Bytes out{kAbeFormat};
  append_prefixed16(out, view(user_gid));
  append_prefixed16(out, view(authority_id));
  append_u64_be(out, static_cast<uint64_t>(issued_at.time_since_epoch().count()));
  append_u64_be(out, static_cast<uint64_t>(expires_at.time_since_epoch().count()));
  append_u16_be(out, static_cast<uint16_t>(shares.size()));
  for (const auto& [attr, share] : shares) {
    append_prefixed16(out, view(attr.authority));
    append_prefixed16(out, view(attr.name));
    append(out, share.to_bytes());
  }
  return out;
}

UserAbeKey UserAbeKey::decode(ByteView bytes) {
  Reader r(bytes);
  if (r.u8() != kAbeFormat) throw Error(ErrorCode::Format, "unsupported ABE key format");
  UserAbeKey k;
  k.user_gid = as_string(r.prefixed16());
  k.authority_id = as_string(r.prefixed16());
  k.issued_at = Timestamp(Duration(static_cast<int64_t>(r.u64())));
  k.expires_at = Timestamp(Duration(static_cast<int64_t>(r.u64())));
  uint16_t count = r.u16();
  for (uint16_t i = 0; i < count; ++i) {
    Attribute a;
    a.authority = as_string(r.prefixed16());
    a.name = as_string(r.prefixed16());
    k.shares.emplace(std::move(a), Scalar::from_bytes(r.take(kScalarSize)));
  }
  r.expect_done();
  return k;
}

Bytes AbeCiphertext::encode() const {
  Bytes out{kAbeFormat};
  append_prefixed32(out, policy.encode());
  append_prefixed32(out, body);
  append_u16_be(out, static_cast<uint16_t>(leaf_shares.size()));
  for (const auto& s : leaf_shares) append_prefixed16(out, s);
  return out;
}

AbeCiphertext AbeCiphertext::decode(ByteView bytes) {
  try {
    Reader r(bytes);
    if (r.u8() != kAbeFormat) throw Error(ErrorCode::MalformedCiphertext, "unsupported ciphertext format");
    auto policy = AccessPolicy::decode(r.prefixed32());
    auto body_view = r.prefixed32();
    AbeCiphertext ct{std::move(policy), Bytes(body_view.begin(), body_view.end()), {}};
    uint16_t count = r.u16();
    for (uint16_t i = 0; i < count; ++i) {
      auto s = r.prefixed16();
      ct.leaf_shares.emplace_back(s.begin(), s.end());
    }
    r.expect_done();
    if (ct.body.empty() || ct.leaf_shares.size() != ct.policy.leaves().size())
      throw Error(ErrorCode::MalformedCiphertext, "share count does not match policy");
    return ct;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedCiphertext) throw;
    throw Error(ErrorCode::MalformedCiphertext, e.what());
  }
}

// ---------------------------------------------------------------------------
// Reference scheme

AuthorityKeys ReferenceAbe::authority_setup(const std::string& authority_id, RandomSource& rng) const {
  if (!is_ident(authority_id)) throw Error(ErrorCode::InvalidPolicy, "authority id must be an identifier");
  AuthorityKeys keys{authority_id, rng.bytes(32), {}};
  keys.public_params = AuthorityPublicParams{authority_id, {}}.encode();
  return keys;
}

void ReferenceAbe::publish_attribute(AuthorityKeys& authority, const std::string& attribute_name) const {
  if (!is_ident(attribute_name)) throw Error(ErrorCode::InvalidPolicy, "attribute name must be an identifier");
  auto params = AuthorityPublicParams::decode(authority.public_params);
  if (params.attributes.count(attribute_name)) return;
  const Point g = Point::generator();
  params.attributes.emplace(attribute_name,
                            AttributePublicKey{attribute_scalar(authority, "LOCATHE-ABE-K", attribute_name) * g,
                                               attribute_scalar(authority, "LOCATHE-ABE-T", attribute_name) * g});
  authority.public_params = params.encode();
}

UserAbeKey ReferenceAbe::keygen(AuthorityKeys& authority, const std::string& user_gid, const AttributeSet& attrs,
                                Timestamp issued_at, Duration validity) const {
  if (validity <= Duration::zero()) throw Error(ErrorCode::InvalidKey, "key validity must be positive");
  for (const auto& a : attrs) {
    if (a.authority != authority.authority_id)
      throw Error(ErrorCode::ForeignAttribute, a.to_string() + " is not issued by " + authority.authority_id);
  }
  UserAbeKey key{user_gid, authority.authority_id, {}, issued_at, issued_at + validity};
  const Scalar h = gid_scalar(user_gid);
  for (const auto& a : attrs) {
    publish_attribute(authority, a.name);
    Scalar k = attribute_scalar(authority, "LOCATHE-ABE-K", a.name);
    Scalar t = attribute_scalar(authority, "LOCATHE-ABE-T", a.name);
    key.shares.emplace(a, k + h * t);
  }
  return key;
}

AbeCiphertext ReferenceAbe::encrypt(const AbePublicParams& params, const AccessPolicy& policy, ByteView plaintext,
                                    RandomSource& rng) const {
  auto leaves = policy.leaves();
  std::vector<const AttributePublicKey*> leaf_keys;
  for (const auto& a : leaves) {
    auto auth = params.authorities.find(a.authority);
    if (auth == params.authorities.end()) throw Error(ErrorCode::UnknownAuthority, a.authority);
    auto attr = auth->second.attributes.find(a.name);
    if (attr == auth->second.attributes.end()) throw Error(ErrorCode::UnknownAttribute, a.to_string());
    leaf_keys.push_back(&attr->second);
  }

  Scalar secret = Scalar::random_nonzero(rng);
  std::vector<Scalar> lambda, omega;
  share_secret(policy.root(), secret, rng, lambda);
  share_secret(policy.root(), Scalar::zero(), rng, omega);

  const Point g = Point::generator();
  const Point& q = blinding_base();
  AbeCiphertext ct{policy, {}, {}};
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Scalar r = Scalar::random_nonzero(rng);
    Point big_r = r * g;
    Point c = lambda[i] * g + r * leaf_keys[i]->k;
    Point d = r * leaf_keys[i]->t + omega[i] * q;
    ct.leaf_shares.push_back(concat(big_r.encode(), c.encode(), d.encode()));
  }
  ct.body = enc_auth(content_key(secret * g), kBodyNonce, plaintext, policy.encode());
  return ct;
}

Bytes ReferenceAbe::decrypt(std::span<const UserAbeKey> keys, const AbeCiphertext& ct, Timestamp now) const {
  struct Holding {
    const Scalar* share;
    Scalar gid;
  };
  std::map<Attribute, Holding> usable;
  AttributeSet all_granted, unexpired;
  for (const auto& key : keys) {
    bool live = key.valid_at(now);
    for (const auto& [attr, share] : key.shares) {
      all_granted.insert(attr);
      if (!live) continue;
      unexpired.insert(attr);
      usable.emplace(attr, Holding{&share, gid_scalar(key.user_gid)});
    }
  }

  auto plan = reconstruction(ct.policy.root(), unexpired, 0);
  if (!plan) {
    if (policy_satisfied(ct.policy, all_granted)) throw Error(ErrorCode::KeyExpired, "needed attributes have expired");
    throw Error(ErrorCode::PolicyNotSatisfied, "attributes do not satisfy " + ct.policy.to_string());
  }

  auto leaves = ct.policy.leaves();
  if (ct.leaf_shares.size() != leaves.size()) throw Error(ErrorCode::MalformedCiphertext, "share count mismatch");
  Point secret_point;
  for (const auto& [index, coefficient] : *plan) {
    const auto& material = ct.leaf_shares[index];
    if (material.size() != kLeafShareSize) throw Error(ErrorCode::MalformedCiphertext, "leaf share size");
    ByteView m(material);
    Point big_r = Point::decode(m.subspan(0, kPointSize));
    Point c = Point::decode(m.subspan(kPointSize, kPointSize));
    Point d = Point::decode(m.subspan(2 * kPointSize, kPointSize));
    const Holding& h = usable.at(leaves[index]);
    // C - share*R + h*D = lambda*G + h*omega*Q
    Point recovered = c - (*h.share) * big_r + h.gid * d;
    secret_point = secret_point + coefficient * recovered;
  }
  try {
    return dec_auth(content_key(secret_point), kBodyNonce, ct.body, ct.policy.encode());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AuthenticationFailed) throw;
    throw Error(ErrorCode::PolicyNotSatisfied, "key shares do not combine (mixed identities or corrupt ciphertext)");
  }
}

const AbeScheme& default_abe_scheme() {
  static const ReferenceAbe scheme;
  return scheme;
}

// ---------------------------------------------------------------------------
// Registry

AuthorityKeys& AuthorityRegistry::setup(const AbeScheme& scheme, const std::string& authority_id, RandomSource& rng) {
  if (contains(authority_id)) throw Error(ErrorCode::DuplicateAuthority, authority_id);
  return authorities_.emplace(authority_id, scheme.authority_setup(authority_id, rng)).first->second;
}

void AuthorityRegistry::insert(AuthorityKeys keys) {
  if (contains(keys.authority_id)) throw Error(ErrorCode::DuplicateAuthority, keys.authority_id);
  std::string id = keys.authority_id;
  authorities_.emplace(std::move(id), std::move(keys));
}

void AuthorityRegistry::remove(const std::string& authority_id) { authorities_.erase(authority_id); }

AuthorityKeys& AuthorityRegistry::at(const std::string& authority_id) {
  auto it = authorities_.find(authority_id);
  if (it == authorities_.end()) throw Error(ErrorCode::UnknownAuthority, authority_id);
  return it->second;
}

const AuthorityKeys& AuthorityRegistry::at(const std::string& authority_id) const {
  auto it = authorities_.find(authority_id);
  if (it == authorities_.end()) throw Error(ErrorCode::UnknownAuthority, authority_id);
  return it->second;
}

AbePublicParams AuthorityRegistry::public_params() const {
  AbePublicParams out;
  for (const auto& [id, keys] : authorities_) out.authorities.emplace(id, AuthorityPublicParams::decode(keys.public_params));
  return out;
}

}  // namespace locathe
