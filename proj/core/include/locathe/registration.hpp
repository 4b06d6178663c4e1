#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "locathe/abe.hpp"
#include "locathe/bytes.hpp"
#include "locathe/crypto.hpp"
#include "locathe/random.hpp"
#include "locathe/time.hpp"

namespace locathe {

inline constexpr Duration kDefaultExpiry = std::chrono::hours(24 * 15);
inline constexpr std::size_t kUserKeySize = 32;
inline constexpr std::size_t kSpwdSize = 32;
inline constexpr std::size_t kKdfSaltSize = 16;
inline constexpr std::string_view kRegistryFormat = "locathe-registry/1";
inline constexpr std::string_view kBundleFormat = "locathe-bundle/1";

struct UserRecord {
  std::string user_id;
  Bytes user_key;
  Bytes spwd;
  Bytes kdf_salt;
  /// Present when UserKey was stretched from a password.
  std::optional<Bytes> password_salt;
  TokenSeed token_seed;
  std::vector<UserAbeKey> abe_keys;
  std::optional<std::string> relying_party_id;
  Timestamp issued_at{};
  Timestamp expires_at{};

  bool active_at(Timestamp now) const { return issued_at <= now && now < expires_at; }
};

/// What the user agent stores. Holds spwd, never UserKey.
struct RegistrationBundle {
  std::string user_id;
  std::optional<std::string> relying_party_id;
  Bytes spwd;
  Bytes kdf_salt;
  TokenSeed token_seed;
  std::vector<UserAbeKey> abe_keys;
  std::string service_id;
  VerifyKey service_key;
  std::string curve_id;
  std::string prf_id;
  Timestamp expires_at{};

  std::string to_json() const;
  static RegistrationBundle from_json(std::string_view text);
};

/// spwd = kdf_stretch(user_key, salt).
Bytes derive_spwd(ByteView user_key, ByteView salt, uint32_t iterations = kDefaultKdfIterations);

struct RegistryConfig {
  std::string service_id = "locathe-service";
  Duration expiry = kDefaultExpiry;
  uint32_t kdf_iterations = kDefaultKdfIterations;
};

/// Service-side user database plus the service signing key and ABE authorities.
///
/// Thread-safety: lookups take a shared lock and may run concurrently; register/renew and
/// authority changes take the exclusive lock, so records are never observed half-written.
/// The RandomSource passed to a writer is only drawn from under that lock.
class ServiceRegistry {
 public:
  ServiceRegistry(RegistryConfig config, RandomSource& rng);
  ServiceRegistry(RegistryConfig config, SigningKey signing_key);

  ServiceRegistry(const ServiceRegistry&) = delete;
  ServiceRegistry& operator=(const ServiceRegistry&) = delete;

  const RegistryConfig& config() const { return config_; }
  const SigningKey& signing_key() const { return signing_key_; }

  /// Creates an ABE authority and publishes `attributes` under it. DuplicateAuthority.
  void add_authority(const std::string& authority_id, const std::vector<std::string>& attributes, RandomSource& rng);
  void publish_attribute(const std::string& authority_id, const std::string& attribute_name);
  std::vector<std::string> authority_ids() const;
  AbePublicParams abe_public_params() const;

  /// AlreadyRegistered when an active record exists for (user_id, relying_party_id);
  /// UnknownAuthority when an attribute names an authority that was never set up.
  RegistrationBundle register_user(const std::string& user_id, const AttributeSet& attrs,
                                   std::optional<ByteView> password, Timestamp now, RandomSource& rng,
                                   const std::optional<std::string>& relying_party_id = std::nullopt);

  /// UnknownUser when absent, Expired at or after expires_at.
  UserRecord lookup_user(const std::string& user_id, Timestamp now,
                         const std::optional<std::string>& relying_party_id = std::nullopt) const;

  /// The agent-side bundle for an active record. UnknownUser or Expired as lookup_user.
  RegistrationBundle bundle(const std::string& user_id, Timestamp now,
                            const std::optional<std::string>& relying_party_id = std::nullopt) const;

  /// Fresh UserKey, spwd, token seed and ABE keys over the same attributes. UnknownUser.
  RegistrationBundle renew_user(const std::string& user_id, Timestamp now, RandomSource& rng,
                                const std::optional<std::string>& relying_party_id = std::nullopt);

  /// Every record including expired ones, ordered by (user_id, relying_party_id).
  std::vector<UserRecord> records() const;
  std::size_t size() const;

  std::string to_json() const;
  static std::unique_ptr<ServiceRegistry> from_json(std::string_view text);
  /// Writes through a temporary file and rename. Io on failure.
  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<ServiceRegistry> load(const std::filesystem::path& path);

 private:
  using Key = std::pair<std::string, std::string>;
  static Key key_of(const std::string& user_id, const std::optional<std::string>& rp) {
    return {user_id, rp.value_or("")};
  }

  UserRecord issue(const std::string& user_id, const AttributeSet& attrs, std::optional<ByteView> password,
                   Timestamp now, RandomSource& rng, const std::optional<std::string>& relying_party_id);
  RegistrationBundle bundle_for(const UserRecord& record) const;

  RegistryConfig config_;
  SigningKey signing_key_;
  AuthorityRegistry authorities_;
  std::map<Key, UserRecord> users_;
  mutable std::shared_mutex mutex_;
};

}  // namespace locathe
