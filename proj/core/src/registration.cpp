#include "locathe/registration.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "locathe/error.hpp"

namespace locathe {
namespace {

using nlohmann::json;

constexpr std::size_t kTokenSeedSize = 32;

std::string b64(ByteView b) { return base64_encode(b); }

Bytes unb64(const json& j, const char* field) { return base64_decode(j.at(field).get<std::string>()); }

int64_t micros(Timestamp t) { return t.time_since_epoch().count(); }

Timestamp from_micros(int64_t us) { return Timestamp(Duration(us)); }

json token_to_json(const TokenSeed& t) {
  return {{"seed", b64(t.seed)}, {"step_seconds", t.step_seconds}, {"digits", t.digits}};
}

TokenSeed token_from_json(const json& j) {
  TokenSeed t{unb64(j, "seed"), j.at("step_seconds").get<uint32_t>(), j.at("digits").get<uint32_t>()};
  t.validate();
  return t;
}

json abe_keys_to_json(const std::vector<UserAbeKey>& keys) {
  json out = json::array();
  for (const auto& k : keys) out.push_back(b64(k.encode()));
  return out;
}

std::vector<UserAbeKey> abe_keys_from_json(const json& j) {
  std::vector<UserAbeKey> out;
  for (const auto& k : j) out.push_back(UserAbeKey::decode(base64_decode(k.get<std::string>())));
  return out;
}

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> optional_string(const json& j, const char* field) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  return j.at(field).get<std::string>();
}

template <typename Fn>
auto parse_json(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string(what) + ": " + e.what());
  }
}

void check_format(const json& j, std::string_view expected) {
  if (!j.contains("format") || j.at("format") != expected)
    throw Error(ErrorCode::Format, "expected format " + std::string(expected));
}

}  // namespace

Bytes derive_spwd(ByteView user_key, ByteView salt, uint32_t iterations) {
  return to_bytes(kdf_stretch(user_key, salt, iterations).bytes());
}

// ---------------------------------------------------------------------------
// Bundle

std::string RegistrationBundle::to_json() const {
  json j = {{"format", kBundleFormat},
            {"user_id", user_id},
            {"relying_party_id", optional_string(relying_party_id)},
            {"spwd", b64(spwd)},
            {"kdf_salt", b64(kdf_salt)},
            {"token", token_to_json(token_seed)},
            {"abe_keys", abe_keys_to_json(abe_keys)},
            {"service_id", service_id},
            {"service_key", b64(service_key.bytes())},
            {"curve", curve_id},
            {"prf", prf_id},
            {"expires_at_us", micros(expires_at)}};
  return j.dump(2);
}

RegistrationBundle RegistrationBundle::from_json(std::string_view text) {
  return parse_json("bundle", [&] {
    json j = json::parse(text);
    check_format(j, kBundleFormat);
    RegistrationBundle b;
    b.user_id = j.at("user_id").get<std::string>();
    b.relying_party_id = optional_string(j, "relying_party_id");
    b.spwd = unb64(j, "spwd");
    b.kdf_salt = unb64(j, "kdf_salt");
    b.token_seed = token_from_json(j.at("token"));
    b.abe_keys = abe_keys_from_json(j.at("abe_keys"));
    b.service_id = j.at("service_id").get<std::string>();
    b.service_key = VerifyKey::from_bytes(unb64(j, "service_key"));
    b.curve_id = j.at("curve").get<std::string>();
    b.prf_id = j.at("prf").get<std::string>();
    b.expires_at = from_micros(j.at("expires_at_us").get<int64_t>());
    if (b.spwd.size() != kSpwdSize || b.kdf_salt.size() != kKdfSaltSize)
      throw Error(ErrorCode::Format, "bundle spwd or salt has the wrong length");
    return b;
  });
}

// ---------------------------------------------------------------------------
// Registry

ServiceRegistry::ServiceRegistry(RegistryConfig config, RandomSource& rng)
    : ServiceRegistry(std::move(config), SigningKey::generate(rng)) {}

ServiceRegistry::ServiceRegistry(RegistryConfig config, SigningKey signing_key)
    : config_(std::move(config)), signing_key_(std::move(signing_key)) {
  if (config_.expiry <= Duration::zero()) throw Error(ErrorCode::InvalidKey, "expiry policy must be positive");
}

void ServiceRegistry::add_authority(const std::string& authority_id, const std::vector<std::string>& attributes,
                                    RandomSource& rng) {
  std::unique_lock lock(mutex_);
  const auto& abe = default_abe_scheme();
  AuthorityKeys& keys = authorities_.setup(abe, authority_id, rng);
  for (const auto& a : attributes) abe.publish_attribute(keys, a);
}

void ServiceRegistry::publish_attribute(const std::string& authority_id, const std::string& attribute_name) {
  std::unique_lock lock(mutex_);
  default_abe_scheme().publish_attribute(authorities_.at(authority_id), attribute_name);
}

std::vector<std::string> ServiceRegistry::authority_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, keys] : authorities_.all()) out.push_back(id);
  return out;
}

AbePublicParams ServiceRegistry::abe_public_params() const {
  std::shared_lock lock(mutex_);
  return authorities_.public_params();
}

UserRecord ServiceRegistry::issue(const std::string& user_id, const AttributeSet& attrs,
                                  std::optional<ByteView> password, Timestamp now, RandomSource& rng,
                                  const std::optional<std::string>& relying_party_id) {
  if (user_id.empty()) throw Error(ErrorCode::UnknownUser, "user id must be non-empty");
  std::map<std::string, AttributeSet> by_authority;
  for (const auto& a : attrs) {
    if (!authorities_.contains(a.authority)) throw Error(ErrorCode::UnknownAuthority, a.authority);
    by_authority[a.authority].insert(a);
  }

  UserRecord r;
  r.user_id = user_id;
  r.relying_party_id = relying_party_id;
  if (password) {
    r.password_salt = rng.bytes(kKdfSaltSize);
    r.user_key = to_bytes(kdf_stretch(*password, *r.password_salt, config_.kdf_iterations).bytes());
  } else {
    r.user_key = rng.bytes(kUserKeySize);
  }
  r.kdf_salt = rng.bytes(kKdfSaltSize);
  r.spwd = derive_spwd(r.user_key, r.kdf_salt, config_.kdf_iterations);
  r.token_seed = TokenSeed{rng.bytes(kTokenSeedSize)};
  r.issued_at = now;
  r.expires_at = now + config_.expiry;
  const auto& abe = default_abe_scheme();
  for (const auto& [authority, set] : by_authority)
    r.abe_keys.push_back(abe.keygen(authorities_.at(authority), user_id, set, now, config_.expiry));
  return r;
}

RegistrationBundle ServiceRegistry::bundle_for(const UserRecord& r) const {
  RegistrationBundle b;
  b.user_id = r.user_id;
  b.relying_party_id = r.relying_party_id;
  b.spwd = r.spwd;
  b.kdf_salt = r.kdf_salt;
  b.token_seed = r.token_seed;
  b.abe_keys = r.abe_keys;
  b.service_id = config_.service_id;
  b.service_key = signing_key_.verify_key();
  b.curve_id = std::string(kCurveId);
  b.prf_id = std::string(kPrfId);
  b.expires_at = r.expires_at;
  return b;
}

RegistrationBundle ServiceRegistry::register_user(const std::string& user_id, const AttributeSet& attrs,
                                                  std::optional<ByteView> password, Timestamp now,
                                                  RandomSource& rng,
                                                  const std::optional<std::string>& relying_party_id) {
  std::unique_lock lock(mutex_);
  auto key = key_of(user_id, relying_party_id);
  auto it = users_.find(key);
  if (it != users_.end() && it->second.active_at(now)) throw Error(ErrorCode::AlreadyRegistered, user_id);
  UserRecord record = issue(user_id, attrs, password, now, rng, relying_party_id);
  auto bundle = bundle_for(record);
  users_.insert_or_assign(std::move(key), std::move(record));
  return bundle;
}

UserRecord ServiceRegistry::lookup_user(const std::string& user_id, Timestamp now,
                                        const std::optional<std::string>& relying_party_id) const {
  std::shared_lock lock(mutex_);
  auto it = users_.find(key_of(user_id, relying_party_id));
  if (it == users_.end()) throw Error(ErrorCode::UnknownUser, "no such user");
  if (!it->second.active_at(now)) throw Error(ErrorCode::Expired, "registration not active");
  return it->second;
}

RegistrationBundle ServiceRegistry::bundle(const std::string& user_id, Timestamp now,
                                           const std::optional<std::string>& relying_party_id) const {
  return bundle_for(lookup_user(user_id, now, relying_party_id));
}

RegistrationBundle ServiceRegistry::renew_user(const std::string& user_id, Timestamp now, RandomSource& rng,
                                               const std::optional<std::string>& relying_party_id) {
  std::unique_lock lock(mutex_);
  auto it = users_.find(key_of(user_id, relying_party_id));
  if (it == users_.end()) throw Error(ErrorCode::UnknownUser, "no such user");
  AttributeSet attrs;
  for (const auto& k : it->second.abe_keys)
    for (const auto& a : k.attributes()) attrs.insert(a);
  // A renewed password-derived key would need the password again; renewal issues a random UserKey.
  UserRecord fresh = issue(user_id, attrs, std::nullopt, now, rng, relying_party_id);
  it->second = std::move(fresh);
  return bundle_for(it->second);
}

std::vector<UserRecord> ServiceRegistry::records() const {
  std::shared_lock lock(mutex_);
  std::vector<UserRecord> out;
  for (const auto& [key, r] : users_) out.push_back(r);
  return out;
}

std::size_t ServiceRegistry::size() const {
  std::shared_lock lock(mutex_);
  return users_.size();
}

std::string ServiceRegistry::to_json() const {
  std::shared_lock lock(mutex_);
  json j = {{"format", kRegistryFormat},
            {"service_id", config_.service_id},
            {"signing_seed", b64(signing_key_.seed())},
            {"expiry_us", config_.expiry.count()},
            {"kdf_iterations", config_.kdf_iterations}};
  json authorities = json::array();
  for (const auto& [id, keys] : authorities_.all()) {
    authorities.push_back(
        {{"id", id}, {"master_secret", b64(keys.master_secret)}, {"public_params", b64(keys.public_params)}});
  }
  j["authorities"] = std::move(authorities);
  json users = json::array();
  for (const auto& [key, r] : users_) {
    json u = {{"user_id", r.user_id},
              {"relying_party_id", optional_string(r.relying_party_id)},
              {"user_key", b64(r.user_key)},
              {"spwd", b64(r.spwd)},
              {"kdf_salt", b64(r.kdf_salt)},
              {"token", token_to_json(r.token_seed)},
              {"abe_keys", abe_keys_to_json(r.abe_keys)},
              {"issued_at_us", micros(r.issued_at)},
              {"expires_at_us", micros(r.expires_at)}};
    if (r.password_salt) u["password_salt"] = b64(*r.password_salt);
    users.push_back(std::move(u));
  }
  j["users"] = std::move(users);
  return j.dump(2);
}

std::unique_ptr<ServiceRegistry> ServiceRegistry::from_json(std::string_view text) {
  return parse_json("registry", [&] {
    json j = json::parse(text);
    check_format(j, kRegistryFormat);
    RegistryConfig config{j.at("service_id").get<std::string>(), Duration(j.at("expiry_us").get<int64_t>()),
                          j.at("kdf_iterations").get<uint32_t>()};
    auto registry =
        std::make_unique<ServiceRegistry>(std::move(config), SigningKey::from_seed(unb64(j, "signing_seed")));
    for (const auto& a : j.at("authorities")) {
      AuthorityKeys keys{a.at("id").get<std::string>(), unb64(a, "master_secret"), unb64(a, "public_params")};
      AuthorityPublicParams::decode(keys.public_params);
      registry->authorities_.insert(std::move(keys));
    }
    for (const auto& u : j.at("users")) {
      UserRecord r;
      r.user_id = u.at("user_id").get<std::string>();
      r.relying_party_id = optional_string(u, "relying_party_id");
      r.user_key = unb64(u, "user_key");
      r.spwd = unb64(u, "spwd");
      r.kdf_salt = unb64(u, "kdf_salt");
      if (u.contains("password_salt")) r.password_salt = unb64(u, "password_salt");
      r.token_seed = token_from_json(u.at("token"));
      r.abe_keys = abe_keys_from_json(u.at("abe_keys"));
      r.issued_at = from_micros(u.at("issued_at_us").get<int64_t>());
      r.expires_at = from_micros(u.at("expires_at_us").get<int64_t>());
      if (r.user_key.size() != kUserKeySize || r.spwd.size() != kSpwdSize || r.kdf_salt.size() != kKdfSaltSize)
        throw Error(ErrorCode::Format, "user record " + r.user_id + " has wrong field lengths");
      auto key = key_of(r.user_id, r.relying_party_id);
      if (!registry->users_.emplace(std::move(key), std::move(r)).second)
        throw Error(ErrorCode::Format, "duplicate user record");
    }
    return registry;
  });
}

void ServiceRegistry::save(const std::filesystem::path& path) const {
  std::string text = to_json();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text << '\n';
    if (!out.flush()) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot replace " + path.string() + ": " + ec.message());
}

std::unique_ptr<ServiceRegistry> ServiceRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace locathe
