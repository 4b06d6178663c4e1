#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "locathe/protocol.hpp"

namespace locathe::sim {

/// Event queue over virtual time. Events at equal times run in scheduling order.
class VirtualClock {
 public:
  using Event = std::function<void()>;

  Timestamp now() const { return now_; }
  /// Background events (beacon ticks) do not keep a run alive on their own.
  void schedule(Timestamp at, Event event, bool background = false);
  /// Runs the next event. False when the queue is empty.
  bool step();
  std::size_t pending() const { return queue_.size(); }
  std::size_t pending_foreground() const { return foreground_; }
  std::optional<Timestamp> next_time() const;

 private:
  struct Entry {
    Timestamp at;
    uint64_t seq;
    bool background;
    Event event;
    bool operator>(const Entry& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };

  Timestamp now_{};
  uint64_t seq_ = 0;
  std::size_t foreground_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
};

enum class Origin : uint8_t { Service, Agent, Adversary };

std::string_view to_string(Origin o);

/// One transmission on the medium.
struct Frame {
  uint64_t id = 0;
  Timestamp time{};
  std::string location;
  std::string sender;
  Origin origin = Origin::Service;
  Bytes bytes;
  /// Octets no honest endpoint ever sent.
  bool forged = false;
};

struct ServiceSpec {
  std::string name;
  std::string location;
  Octets8 beacon_id{};
  std::string policy = "city:resident";
  Duration broadcast_interval = kDefaultBroadcastInterval;
  Duration nb_validity = kDefaultNbValidity;
  Duration auth_error_delay = kDefaultAuthErrorDelay;
};

struct AgentSpec {
  std::string name;
  std::string location;
  std::string user_id;
  std::vector<std::string> attributes = {"city:resident"};
  TierMode tier = TierMode::Both;
  /// The agent hears nothing before this time.
  Duration enabled_at{};
  Duration clock_skew{};
  /// Test hook: the agent holds a corrupted spwd.
  bool wrong_password = false;
  /// Test hook: the agent presents an identity the registry never issued.
  bool unregistered = false;
  int max_attempts = 1;
};

struct MatchSpec {
  /// Message type name as in to_string(MsgType), or empty for any.
  std::string type;
  std::string location;
  std::optional<Origin> origin;
  /// Zero-based index among frames matching the other fields.
  std::optional<std::size_t> nth;
};

enum class ActionKind : uint8_t { Forward, Drop, Record, Replay, Modify, Inject, Relay, Fetch };

std::string_view to_string(ActionKind k);
ActionKind parse_action(std::string_view name);

struct ActionSpec {
  ActionKind kind = ActionKind::Forward;
  /// Record: storage tag. Replay: tag to replay, or empty for the matched frame.
  std::string tag;
  Duration delay{};
  /// Replay / Inject: number of copies.
  int count = 1;
  /// Target location; empty means the frame's own location.
  std::string location;
  /// Modify: "flip_bit" or "mitm_ke".
  std::string transform;
  std::size_t offset = 0;
  /// Inject: fixed octets, or random octets of `random_length` when empty.
  Bytes bytes;
  std::size_t random_length = 0;
};

struct RuleSpec {
  MatchSpec match;
  std::vector<ActionSpec> actions;
};

struct AdversarySpec {
  /// Locations where Mallory hears traffic.
  std::vector<std::string> listen;
  std::vector<RuleSpec> rules;
};

struct ScenarioSpec {
  std::string name = "custom";
  uint64_t seed = 1;
  std::vector<std::string> locations;
  std::map<std::string, std::vector<std::string>> authorities = {{"city", {"resident", "staff"}}};
  std::vector<ServiceSpec> services;
  std::vector<AgentSpec> agents;
  AdversarySpec adversary;
  /// Hard stop; runs also end once every agent is done and only beacons remain.
  Duration until = std::chrono::seconds(30);
  uint32_t kdf_iterations = 1000;

  /// ScenarioMisconfigured on dangling names or an empty setup.
  void validate() const;
  std::string to_json() const;
  /// ScenarioMisconfigured on malformed input.
  static ScenarioSpec from_json(std::string_view text);
};

struct GoalFlags {
  bool impersonated_initiator = false;
  bool impersonated_responder = false;
  bool learned_plaintext = false;
  bool session_hijacked = false;

  bool any() const { return impersonated_initiator || impersonated_responder || learned_plaintext || session_hijacked; }
  bool operator==(const GoalFlags&) const = default;
};

struct SessionOutcome {
  std::string node;
  Role role = Role::Initiator;
  std::string location;
  SessionIds ids;
  Phase phase = Phase::AwaitBroadcast;
  std::optional<ErrorCode> failure;
  Phase failed_in = Phase::AwaitBroadcast;
  std::optional<std::string> peer_user;
  Bytes sent;
  Bytes received;
};

struct AgentOutcome {
  std::string name;
  std::string location;
  int attempts = 0;
  std::optional<ErrorCode> last_error;
  /// Phase of the latest session, AWAIT_BROADCAST when none started.
  Phase phase = Phase::AwaitBroadcast;
};

struct LogEntry {
  Timestamp time{};
  std::string location;
  /// "tx", "rx", "drop", "record", "relay", "inject", "timeout".
  std::string kind;
  std::string node;
  std::string type;
  std::size_t size = 0;
  std::string disposition;
  std::string note;
  bool operator==(const LogEntry&) const = default;
};

struct ScenarioOutcome {
  std::string name;
  uint64_t seed = 0;
  std::vector<AgentOutcome> agents;
  std::vector<SessionOutcome> sessions;
  GoalFlags flags;
  /// A responder established with an initiator at another location: the relay limitation.
  bool location_spoofed = false;
  std::map<std::string, std::size_t> dispositions;
  std::vector<LogEntry> log;
  Timestamp finished_at{};

  std::size_t established(Role role) const;
  std::string to_json() const;
};

/// Values an attacker could target, gathered from the honest endpoints' observers and the registry.
struct SecretRecord {
  std::string owner;
  std::string label;
  Bytes value;
};

/// Ground truth about one session, kept out of any exported outcome.
struct SessionTruth {
  std::string node;
  Role role = Role::Initiator;
  SessionIds ids;
  Phase phase = Phase::AwaitBroadcast;
  std::optional<KeySchedule> keys;
  std::optional<LongTermSecret> ltk;
};

/// One simulated world: registry, service endpoints, user agents, medium and Mallory.
/// Mallory's rules only ever see Frame octets and the clock.
class World {
 public:
  explicit World(ScenarioSpec spec);
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  ScenarioOutcome run();

  const ScenarioSpec& spec() const { return spec_; }
  const ServiceRegistry& registry() const { return *registry_; }
  const std::vector<Frame>& frames() const { return frames_; }
  /// Frames Mallory heard or sent.
  std::vector<const Frame*> adversary_view() const;
  const std::vector<SecretRecord>& secrets() const { return secrets_; }
  std::vector<SessionTruth> session_truth() const;
  /// The wire frames carrying one session's messages, in transmission order: the fetch
  /// response it answered, then every message with its SPI pair.
  std::vector<Bytes> session_frames(const SessionIds& ids) const;

 private:
  struct ServiceNode;
  struct AgentNode;
  struct Adversary;

  void transmit(Frame frame);
  void deliver(const Frame& frame);
  void send_from(const std::string& node, const std::string& location, Origin origin, Bytes bytes, Duration delay);
  void log(const Frame& f, std::string kind, std::string node, std::string disposition = {}, std::string note = {});
  void schedule_beacon(ServiceNode* node, Timestamp at, Timestamp end);
  bool quiescent() const;
  ScenarioOutcome collect() const;
  GoalFlags compute_flags(bool& location_spoofed) const;

  ScenarioSpec spec_;
  VirtualClock clock_;
  DeterministicRandom rng_;
  std::unique_ptr<ServiceRegistry> registry_;
  std::vector<std::unique_ptr<ServiceNode>> services_;
  std::vector<std::unique_ptr<AgentNode>> agents_;
  std::unique_ptr<Adversary> adversary_;
  std::vector<Frame> frames_;
  std::vector<SecretRecord> secrets_;
  std::vector<LogEntry> log_;
  std::map<std::string, std::size_t> dispositions_;
  /// (node, spi_i, spi_r) of sessions that processed a forged frame.
  std::vector<std::pair<std::string, SessionIds>> tainted_;
  std::set<Bytes> honest_bytes_;
  uint64_t next_frame_ = 1;
};

ScenarioOutcome run_scenario(const ScenarioSpec& spec);

// Built-in adversary scenarios.

enum class MitmVariant : uint8_t { SubstituteKe, TamperBnonce };
enum class ReplayCase : uint8_t { A, B };
enum class WormholeVariant : uint8_t { ReplayToP, RangeExtension };

ScenarioSpec eavesdrop_spec(uint64_t seed, TierMode tier = TierMode::Both);
ScenarioSpec mitm_spec(uint64_t seed, MitmVariant variant = MitmVariant::SubstituteKe,
                       TierMode tier = TierMode::Both);
/// Case A replays the broadcast at t + d + delta; case B replays it within the window to a
/// colocated Alice, then replays it again after she has answered it.
ScenarioSpec replay_spec(uint64_t seed, ReplayCase c, Duration delta = std::chrono::seconds(1));
ScenarioSpec wormhole_spec(uint64_t seed, WormholeVariant variant, bool identical_beacons = false);
ScenarioSpec dos_spec(uint64_t seed, int flood_factor = 100);

ScenarioOutcome scenario_eavesdrop(uint64_t seed, TierMode tier = TierMode::Both);
ScenarioOutcome scenario_mitm(uint64_t seed, MitmVariant variant = MitmVariant::SubstituteKe);
ScenarioOutcome scenario_replay(uint64_t seed, ReplayCase c, Duration delta = std::chrono::seconds(1));
ScenarioOutcome scenario_wormhole(uint64_t seed, WormholeVariant variant);
ScenarioOutcome scenario_dos_duplicates(uint64_t seed, int flood_factor = 100);

/// eavesdrop, mitm, replay-a, replay-b, wormhole-replay, wormhole-extend, dos.
const std::vector<std::string>& catalog_names();
std::optional<ScenarioSpec> catalog_spec(std::string_view name, uint64_t seed);

struct Verdict {
  bool matches = false;
  std::string expected;
  std::string observed;
};

/// Compares an outcome against the catalog's expected verdict for `name`.
Verdict judge(std::string_view name, const ScenarioOutcome& outcome);

/// Long-term material an attacker obtains after the fact.
struct CompromisedSecrets {
  Bytes user_key;
  Bytes spwd;
  TokenSeed token_seed;
  std::vector<UserAbeKey> abe_keys;
  std::array<uint8_t, 32> service_seed{};
};

struct ReconstructionResult {
  /// Key schedules the oracle could build from the transcript and the compromised secrets.
  std::vector<KeySchedule> candidates;
  /// Sealed frames any candidate managed to open.
  std::size_t frames_opened = 0;
};

/// Best-effort attacker: rebuilds every key schedule it can from recorded frames plus
/// long-term secrets alone and tries them against the sealed frames.
ReconstructionResult reconstruct_key_schedules(const std::vector<Bytes>& frames, const CompromisedSecrets& secrets,
                                               Timestamp now);

}  // namespace locathe::sim
