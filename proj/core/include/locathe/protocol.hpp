#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "locathe/abe.hpp"
#include "locathe/error.hpp"
#include "locathe/key_schedule.hpp"
#include "locathe/registration.hpp"
#include "locathe/time.hpp"
#include "locathe/wire.hpp"

namespace locathe {

inline constexpr Duration kDefaultBroadcastInterval = 100 * kTimeUnit;
inline constexpr Duration kDefaultNbValidity = std::chrono::seconds(10);
inline constexpr Duration kDefaultSessionTimeout = std::chrono::seconds(5);
inline constexpr Duration kDefaultAuthErrorDelay = std::chrono::milliseconds(250);
/// Additional-factor request carried in T2_MSG2.
inline constexpr std::string_view kTokenFactor = "TOKEN";

enum class TierMode : uint8_t { Tier1 = 1, Tier2 = 2, Both = 3 };

std::string_view to_string(TierMode t);
/// "1", "2" or "both". Format otherwise.
TierMode parse_tier(std::string_view text);
inline bool uses_tier1(TierMode t) { return t != TierMode::Tier2; }
inline bool uses_tier2(TierMode t) { return t != TierMode::Tier1; }

enum class Phase : uint8_t {
  AwaitBroadcast,
  AwaitKe,
  AwaitT1,
  AwaitT2,
  AwaitT2Resp,
  AwaitFinal,
  Established,
  Failed,
};

std::string_view to_string(Phase p);
inline bool is_terminal(Phase p) { return p == Phase::Established || p == Phase::Failed; }

enum class Disposition : uint8_t { Ignore, Process, Reject, Error };

std::string_view to_string(Disposition d);

struct Outgoing {
  Bytes wire;
  /// Hold-back before transmission; auth-class errors use a fixed delay.
  Duration delay{};
};

struct HandleResult {
  Disposition disposition = Disposition::Ignore;
  std::vector<Outgoing> replies;
};

/// Called with every secret value a session derives, before it is used. The simulator uses
/// it to build the sensitive-octet set; nothing in the engine depends on it.
using SecretObserver = std::function<void(std::string_view label, ByteView value)>;

/// The service's identity as carried in T1_AUTH_RESP / T2_MSG2: prefixed16(id) ‖ Ed25519 key.
struct ServiceIdentity {
  std::string service_id;
  VerifyKey key;

  Bytes certificate() const;
  static ServiceIdentity from_certificate(ByteView cert);
};

struct BeaconConfig {
  Octets8 beacon_id{};
  std::string location_id;
  Duration broadcast_interval = kDefaultBroadcastInterval;
  Duration nb_validity = kDefaultNbValidity;
  AccessPolicy access_policy;

  /// InvalidKey unless interval > 0 and validity ≥ interval.
  void validate() const;
};

struct BroadcastRecord {
  Block32 n_b{};
  Octets8 handle{};
  AbeCiphertext bnonce;
  Bytes bnonce_octets;
  Signature signature{};
  Timestamp issued_at{};
  Timestamp expires_at{};
  /// Canonical BNONCE_FETCH_RESP for this record; first entry of the responder transcript.
  Bytes fetch_response;
};

struct BeaconTick {
  Advert advert;
  BroadcastRecord record;
};

/// n_b = random24 ‖ beacon_id; bnonce = ABE(policy, n_b) signed by the service.
BeaconTick beacon_tick(const BeaconConfig& cfg, const SigningKey& service_key, const ServiceIdentity& identity,
                       const AbePublicParams& params, Timestamp now, RandomSource& rng);

/// t ≤ now < t + d.
bool nb_window_check(const BroadcastRecord& record, Timestamp now);

ProtocolMessage make_fetch_request(const Octets8& handle);
/// UnknownHandle when the request names another record or the record has expired.
ProtocolMessage fetch_bnonce(const BroadcastRecord& record, const ProtocolMessage& req, Timestamp now);

struct SessionOptions {
  Duration timeout = kDefaultSessionTimeout;
  SecretObserver observer;
};

/// State shared by both roles. Accessors expose derived session keys for verification;
/// ephemeral scalars are wiped on reaching a terminal phase.
class Session {
 public:
  virtual ~Session() = default;

  Role role() const { return role_; }
  Phase phase() const { return phase_; }
  TierMode tier() const { return tier_; }
  const SessionIds& ids() const { return ids_; }
  std::optional<ErrorCode> failure() const { return failure_; }
  /// Phase in which the session failed.
  Phase failed_in() const { return failed_in_; }
  Timestamp deadline() const { return deadline_; }

  const std::optional<KeySchedule>& key_schedule() const { return ks_; }
  const std::optional<Point>& ge() const { return ge_; }
  const std::optional<Point>& auth_shared() const { return auth_shared_; }
  const std::optional<Block32>& gtk() const { return gtk_; }
  const std::optional<LongTermSecret>& long_term_secret() const { return ltk_; }
  bool holds_ephemeral_secrets() const;

  const Bytes& sent_transcript() const { return sent_; }
  const Bytes& received_transcript() const { return received_; }

  /// Fails the session with Timeout once `now` reaches the deadline.
  bool expire(Timestamp now);

 protected:
  Session(Role role, TierMode tier, SessionOptions options);

  void observe(std::string_view label, ByteView value) const;
  void fail(ErrorCode code);
  void advance(Phase next, Timestamp now);
  void wipe_ephemerals();
  Outgoing send(ProtocolMessage msg, Duration delay = {});
  Outgoing send_sealed(MsgType type, const std::vector<Bytes>& inner);
  Outgoing error_reply(ErrorClass cls, Duration delay = {});
  /// Header checks common to both roles for messages addressed to this session.
  std::optional<Disposition> screen(const ProtocolMessage& msg, MsgType expected) const;
  void derive_keys(const Point& shared);

  Role role_;
  TierMode tier_;
  SessionOptions options_;
  Phase phase_ = Phase::AwaitBroadcast;
  Phase failed_in_ = Phase::AwaitBroadcast;
  std::optional<ErrorCode> failure_;
  Timestamp deadline_{};

  SessionIds ids_;
  SessionNonces nonces_;
  uint32_t next_counter_ = 1;
  uint32_t peer_hwm_ = 0;

  std::optional<Scalar> ephemeral_;
  Point ke_i_, ke_r_;
  std::optional<Point> shared_;
  std::optional<KeySchedule> ks_;
  std::optional<Scalar> s_;
  std::optional<Scalar> lsk_;
  std::optional<Point> lpk_;
  std::optional<Point> ge_;
  std::optional<Point> auth_shared_;
  std::optional<Block32> gtk_;
  std::optional<LongTermSecret> ltk_;

  Bytes sent_;
  Bytes received_;
};

struct InitiatorOptions {
  TierMode tier = TierMode::Tier1;
  /// Opaque "desired services" octets for T1_AUTH_REQ.
  Bytes optional_request;
  /// Offset of this device's token clock from protocol time.
  Duration clock_skew{};
  SessionOptions session;
};

class InitiatorSession final : public Session {
 public:
  struct Start {
    std::unique_ptr<InitiatorSession> session;
    Bytes ke_req;
  };

  /// Verifies the BNONCE signature against the pinned service key, then ABE-decrypts n_b.
  /// BadSignature, PolicyNotSatisfied, KeyExpired or MalformedMessage; no session on error.
  static Start start(const RegistrationBundle& bundle, ByteView fetch_response, InitiatorOptions options,
                     Timestamp now, RandomSource& rng);

  HandleResult handle(ByteView wire, Timestamp now);

  const std::string& user_id() const { return bundle_.user_id; }
  const Octets8& handle_id() const { return handle_; }

 private:
  InitiatorSession(RegistrationBundle bundle, InitiatorOptions options, RandomSource& rng);

  HandleResult on_ke_resp(const ProtocolMessage& msg, Timestamp now);
  HandleResult on_t1_resp(const ProtocolMessage& msg, Timestamp now);
  HandleResult on_t2_resp(const ProtocolMessage& msg, Timestamp now);
  HandleResult on_final_resp(const ProtocolMessage& msg, Timestamp now);
  HandleResult on_error(const ProtocolMessage& msg);
  Outgoing make_t2_msg1();
  Outgoing make_final_req(Timestamp now);
  HandleResult abort(ErrorCode code, ErrorClass cls);
  std::optional<ByteView> identity() const;

  RegistrationBundle bundle_;
  InitiatorOptions init_options_;
  RandomSource& rng_;
  Octets8 handle_{};
  ServiceIdentity service_;
};

struct EndpointConfig {
  BeaconConfig beacon;
  Duration auth_error_delay = kDefaultAuthErrorDelay;
  /// Records older than their validity window are always dropped; 0 means no extra cap.
  std::size_t max_records = 0;
  SessionOptions session;
};

class ServiceEndpoint;

class ResponderSession final : public Session {
 public:
  const std::optional<std::string>& peer_user_id() const { return user_id_; }
  const BroadcastRecord& record() const { return record_; }

 private:
  friend class ServiceEndpoint;
  ResponderSession(const ServiceEndpoint& endpoint, BroadcastRecord record, TierMode tier, SessionOptions options);

  HandleResult on_ke_req(const ProtocolMessage& msg, Timestamp now, RandomSource& rng);
  HandleResult handle(const ProtocolMessage& msg, Timestamp now, RandomSource& rng);
  HandleResult on_t1_req(const ProtocolMessage& msg, Timestamp now);
  HandleResult on_t2_msg1(const ProtocolMessage& msg, Timestamp now, RandomSource& rng);
  HandleResult on_final_req(const ProtocolMessage& msg, Timestamp now);
  HandleResult abort(ErrorCode code, ErrorClass cls);

  const ServiceEndpoint& endpoint_;
  BroadcastRecord record_;
  std::optional<std::string> user_id_;
  std::optional<TokenSeed> token_;
};

/// Service side at one location: the beacon schedule, broadcast records and responder sessions.
class ServiceEndpoint {
 public:
  ServiceEndpoint(const ServiceRegistry& registry, EndpointConfig config, RandomSource& rng);

  const EndpointConfig& config() const { return config_; }
  const ServiceIdentity& identity() const { return identity_; }

  /// Regenerates n_b and returns the ADVERT octets.
  Bytes beacon_tick(Timestamp now);
  HandleResult handle(ByteView wire, Timestamp now);
  /// Times out stale sessions.
  void expire(Timestamp now);

  const std::deque<BroadcastRecord>& records() const { return records_; }
  std::vector<const ResponderSession*> sessions() const;
  std::size_t session_count() const { return sessions_.size(); }

 private:
  friend class ResponderSession;

  const BroadcastRecord* find_record(const Octets8& handle, Timestamp now) const;
  void prune(Timestamp now);

  const ServiceRegistry& registry_;
  EndpointConfig config_;
  RandomSource& rng_;
  ServiceIdentity identity_;
  std::deque<BroadcastRecord> records_;
  std::map<std::pair<Octets8, Octets8>, std::unique_ptr<ResponderSession>> sessions_;
  std::map<Octets8, std::pair<Octets8, Octets8>> by_initiator_spi_;
};

}  // namespace locathe
