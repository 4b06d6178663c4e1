#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "locathe/error.hpp"
#include "locathe/sim.hpp"

namespace locathe::sim {
namespace {

using json = nlohmann::ordered_json;

constexpr Timestamp kEpoch = at_seconds(1'700'000'000);
constexpr Duration kRelayLatency = std::chrono::milliseconds(1);

const Octets8 kBeaconL{'b', 'e', 'a', 'c', 'o', 'n', '-', 'l'};
const Octets8 kBeaconP{'b', 'e', 'a', 'c', 'o', 'n', '-', 'p'};

[[noreturn]] void misconfigured(const std::string& what) { throw Error(ErrorCode::ScenarioMisconfigured, what); }

ScenarioSpec base(std::string name, uint64_t seed, TierMode tier) {
  ScenarioSpec s;
  s.name = std::move(name);
  s.seed = seed;
  s.locations = {"l"};
  ServiceSpec svc;
  svc.name = "service-l";
  svc.location = "l";
  svc.beacon_id = kBeaconL;
  s.services.push_back(svc);
  AgentSpec alice;
  alice.name = "alice";
  alice.location = "l";
  alice.user_id = "alice@example.org";
  alice.tier = tier;
  s.agents.push_back(alice);
  s.adversary.listen = {"l"};
  return s;
}

RuleSpec rule(std::string type, std::vector<ActionSpec> actions, std::optional<std::size_t> nth = std::nullopt,
              std::optional<Origin> origin = std::nullopt, std::string location = {}) {
  return {MatchSpec{std::move(type), std::move(location), origin, nth}, std::move(actions)};
}

ActionSpec act(ActionKind kind) {
  ActionSpec a;
  a.kind = kind;
  return a;
}

ActionSpec replay_self(Duration delay, int count = 1) {
  auto a = act(ActionKind::Replay);
  a.delay = delay;
  a.count = count;
  return a;
}

ActionSpec relay_to(std::string location) {
  auto a = act(ActionKind::Relay);
  a.location = std::move(location);
  a.delay = kRelayLatency;
  return a;
}

// --- JSON helpers

std::string hex8(const Octets8& o) { return to_hex(o); }

Octets8 parse_hex8(const std::string& text) {
  Bytes b = from_hex(text);
  if (b.size() != 8) misconfigured("beacon_id must be 8 octets of hex");
  Octets8 out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

std::optional<Origin> parse_origin(const std::string& text) {
  if (text.empty()) return std::nullopt;
  for (auto o : {Origin::Service, Origin::Agent, Origin::Adversary})
    if (to_string(o) == text) return o;
  misconfigured("unknown origin " + text);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->template get<T>();
}

Duration us(const json& j, const char* key, Duration fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : Duration(it->get<int64_t>());
}

const char* phase_json(Phase p) { return to_string(p).data(); }

json optional_error(const std::optional<ErrorCode>& e) {
  return e ? json(std::string(locathe::to_string(*e))) : json(nullptr);
}

bool known_type_name(const std::string& name) {
  for (uint8_t t = 1; t <= 12; ++t)
    if (to_string(static_cast<MsgType>(t)) == name) return true;
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec validation and JSON

void ScenarioSpec::validate() const {
  if (services.empty()) misconfigured("no services");
  std::set<std::string> locs(locations.begin(), locations.end());
  if (locs.size() != locations.size()) misconfigured("duplicate location");
  auto check_loc = [&](const std::string& l, const std::string& who) {
    if (!locs.count(l)) misconfigured(who + " names unknown location '" + l + "'");
  };
  std::set<std::string> names{"mallory"};
  for (const auto& s : services) {
    if (!names.insert(s.name).second) misconfigured("duplicate node name " + s.name);
    check_loc(s.location, s.name);
    try {
      AccessPolicy::parse(s.policy);
      BeaconConfig{s.beacon_id, s.location, s.broadcast_interval, s.nb_validity, AccessPolicy::parse(s.policy)}
          .validate();
    } catch (const Error& e) {
      misconfigured(s.name + ": " + e.what());
    }
  }
  for (const auto& a : agents) {
    if (!names.insert(a.name).second) misconfigured("duplicate node name " + a.name);
    check_loc(a.location, a.name);
    if (a.user_id.empty()) misconfigured(a.name + ": empty user id");
    if (a.max_attempts < 1) misconfigured(a.name + ": max_attempts must be positive");
    for (const auto& text : a.attributes) {
      try {
        auto attr = Attribute::parse(text);
        auto it = authorities.find(attr.authority);
        if (it == authorities.end() || std::find(it->second.begin(), it->second.end(), attr.name) == it->second.end())
          misconfigured(a.name + ": attribute " + text + " is not published");
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ScenarioMisconfigured) throw;
        misconfigured(a.name + ": " + e.what());
      }
    }
  }
  for (const auto& l : adversary.listen) check_loc(l, "adversary");
  for (const auto& r : adversary.rules) {
    if (!r.match.type.empty() && !known_type_name(r.match.type)) misconfigured("unknown message type " + r.match.type);
    if (!r.match.location.empty()) check_loc(r.match.location, "rule");
    for (const auto& a : r.actions) {
      if (!a.location.empty()) check_loc(a.location, "action");
      if (a.kind == ActionKind::Modify && a.transform != "flip_bit" && a.transform != "mitm_ke")
        misconfigured("unknown transform '" + a.transform + "'");
      if (a.count < 0) misconfigured("negative count");
    }
  }
  if (until <= Duration::zero()) misconfigured("until must be positive");
}

std::string ScenarioSpec::to_json() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["until_us"] = until.count();
  j["kdf_iterations"] = kdf_iterations;
  j["locations"] = locations;
  j["authorities"] = json::object();
  for (const auto& [k, v] : authorities) j["authorities"][k] = v;
  j["services"] = json::array();
  for (const auto& s : services)
    j["services"].push_back({{"name", s.name},
                             {"location", s.location},
                             {"beacon_id", hex8(s.beacon_id)},
                             {"policy", s.policy},
                             {"broadcast_interval_us", s.broadcast_interval.count()},
                             {"nb_validity_us", s.nb_validity.count()},
                             {"auth_error_delay_us", s.auth_error_delay.count()}});
  j["agents"] = json::array();
  for (const auto& a : agents)
    j["agents"].push_back({{"name", a.name},
                           {"location", a.location},
                           {"user_id", a.user_id},
                           {"attributes", a.attributes},
                           {"tier", std::string(locathe::to_string(a.tier))},
                           {"enabled_at_us", a.enabled_at.count()},
                           {"clock_skew_us", a.clock_skew.count()},
                           {"wrong_password", a.wrong_password},
                           {"unregistered", a.unregistered},
                           {"max_attempts", a.max_attempts}});
  json adv;
  adv["listen"] = adversary.listen;
  adv["rules"] = json::array();
  for (const auto& r : adversary.rules) {
    json m = json::object();
    if (!r.match.type.empty()) m["type"] = r.match.type;
    if (!r.match.location.empty()) m["location"] = r.match.location;
    if (r.match.origin) m["origin"] = std::string(to_string(*r.match.origin));
    if (r.match.nth) m["nth"] = *r.match.nth;
    json actions = json::array();
    for (const auto& a : r.actions) {
      json x{{"kind", std::string(to_string(a.kind))}};
      if (!a.tag.empty()) x["tag"] = a.tag;
      if (a.delay != Duration::zero()) x["delay_us"] = a.delay.count();
      if (a.count != 1) x["count"] = a.count;
      if (!a.location.empty()) x["location"] = a.location;
      if (!a.transform.empty()) x["transform"] = a.transform;
      if (a.offset != 0) x["offset"] = a.offset;
      if (!a.bytes.empty()) x["bytes"] = to_hex(a.bytes);
      if (a.random_length != 0) x["random_length"] = a.random_length;
      actions.push_back(std::move(x));
    }
    adv["rules"].push_back({{"match", m}, {"actions", actions}});
  }
  j["adversary"] = adv;
  return j.dump(2);
}

ScenarioSpec ScenarioSpec::from_json(std::string_view text) {
  ScenarioSpec s;
  try {
    json j = json::parse(text);
    s.name = get_or<std::string>(j, "name", "custom");
    s.seed = get_or<uint64_t>(j, "seed", 1);
    s.until = us(j, "until_us", s.until);
    s.kdf_iterations = get_or<uint32_t>(j, "kdf_iterations", s.kdf_iterations);
    s.locations = j.at("locations").get<std::vector<std::string>>();
    if (j.contains("authorities")) {
      s.authorities.clear();
      for (const auto& [k, v] : j["authorities"].items()) s.authorities[k] = v.get<std::vector<std::string>>();
    }
    for (const auto& x : j.at("services")) {
      ServiceSpec svc;
      svc.name = x.at("name").get<std::string>();
      svc.location = x.at("location").get<std::string>();
      svc.beacon_id = parse_hex8(x.at("beacon_id").get<std::string>());
      svc.policy = get_or<std::string>(x, "policy", svc.policy);
      svc.broadcast_interval = us(x, "broadcast_interval_us", svc.broadcast_interval);
      svc.nb_validity = us(x, "nb_validity_us", svc.nb_validity);
      svc.auth_error_delay = us(x, "auth_error_delay_us", svc.auth_error_delay);
      s.services.push_back(std::move(svc));
    }
    for (const auto& x : j.value("agents", json::array())) {
      AgentSpec a;
      a.name = x.at("name").get<std::string>();
      a.location = x.at("location").get<std::string>();
      a.user_id = x.at("user_id").get<std::string>();
      a.attributes = get_or<std::vector<std::string>>(x, "attributes", a.attributes);
      a.tier = parse_tier(get_or<std::string>(x, "tier", "both"));
      a.enabled_at = us(x, "enabled_at_us", a.enabled_at);
      a.clock_skew = us(x, "clock_skew_us", a.clock_skew);
      a.wrong_password = get_or<bool>(x, "wrong_password", false);
      a.unregistered = get_or<bool>(x, "unregistered", false);
      a.max_attempts = get_or<int>(x, "max_attempts", 1);
      s.agents.push_back(std::move(a));
    }
    if (j.contains("adversary")) {
      const auto& adv = j["adversary"];
      s.adversary.listen = get_or<std::vector<std::string>>(adv, "listen", {});
      for (const auto& r : adv.value("rules", json::array())) {
        RuleSpec rs;
        const auto m = r.value("match", json::object());
        rs.match.type = get_or<std::string>(m, "type", "");
        rs.match.location = get_or<std::string>(m, "location", "");
        rs.match.origin = parse_origin(get_or<std::string>(m, "origin", ""));
        if (m.contains("nth")) rs.match.nth = m["nth"].get<std::size_t>();
        for (const auto& x : r.at("actions")) {
          ActionSpec a;
          a.kind = parse_action(x.at("kind").get<std::string>());
          a.tag = get_or<std::string>(x, "tag", "");
          a.delay = us(x, "delay_us", Duration::zero());
          a.count = get_or<int>(x, "count", 1);
          a.location = get_or<std::string>(x, "location", "");
          a.transform = get_or<std::string>(x, "transform", "");
          a.offset = get_or<std::size_t>(x, "offset", 0);
          a.bytes = from_hex(get_or<std::string>(x, "bytes", ""));
          a.random_length = get_or<std::size_t>(x, "random_length", 0);
          rs.actions.push_back(std::move(a));
        }
        s.adversary.rules.push_back(std::move(rs));
      }
    }
  } catch (const json::exception& e) {
    misconfigured(std::string("scenario json: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ScenarioMisconfigured) throw;
    misconfigured(e.what());
  }
  s.validate();
  return s;
}

std::string ScenarioOutcome::to_json() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["finished_at_us"] = (finished_at - kEpoch).count();
  j["flags"] = {{"impersonated_initiator", flags.impersonated_initiator},
                {"impersonated_responder", flags.impersonated_responder},
                {"learned_plaintext", flags.learned_plaintext},
                {"session_hijacked", flags.session_hijacked}};
  j["location_spoofed"] = location_spoofed;
  j["agents"] = json::array();
  for (const auto& a : agents)
    j["agents"].push_back({{"name", a.name},
                           {"location", a.location},
                           {"attempts", a.attempts},
                           {"phase", phase_json(a.phase)},
                           {"last_error", optional_error(a.last_error)}});
  j["sessions"] = json::array();
  for (const auto& s : sessions) {
    json x{{"node", s.node},
           {"role", std::string(role_name(s.role))},
           {"location", s.location},
           {"spi_i", to_hex(s.ids.spi_i)},
           {"spi_r", to_hex(s.ids.spi_r)},
           {"phase", phase_json(s.phase)},
           {"failure", optional_error(s.failure)}};
    if (s.failure) x["failed_in"] = phase_json(s.failed_in);
    if (s.peer_user) x["peer_user"] = *s.peer_user;
    x["sent"] = to_hex(s.sent);
    x["received"] = to_hex(s.received);
    j["sessions"].push_back(std::move(x));
  }
  j["dispositions"] = json::object();
  for (const auto& [k, v] : dispositions) j["dispositions"][k] = v;
  j["log"] = json::array();
  for (const auto& e : log) {
    json x{{"t_us", (e.time - kEpoch).count()}, {"location", e.location}, {"kind", e.kind},
           {"node", e.node},                    {"type", e.type},         {"size", e.size}};
    if (!e.disposition.empty()) x["disposition"] = e.disposition;
    if (!e.note.empty()) x["note"] = e.note;
    j["log"].push_back(std::move(x));
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Catalog

ScenarioSpec eavesdrop_spec(uint64_t seed, TierMode tier) { return base("eavesdrop", seed, tier); }

ScenarioSpec mitm_spec(uint64_t seed, MitmVariant variant, TierMode tier) {
  auto s = base("mitm", seed, tier);
  auto modify = act(ActionKind::Modify);
  if (variant == MitmVariant::SubstituteKe) {
    modify.transform = "mitm_ke";
    s.adversary.rules.push_back(rule("", {modify}));
  } else {
    modify.transform = "flip_bit";
    // Inside the BNONCE ciphertext: header, handle section, then the BNONCE section.
    modify.offset = kHeaderSize + 2 + 8 + 2 + 20;
    s.adversary.rules.push_back(rule("BNONCE_FETCH_RESP", {modify}));
  }
  return s;
}

ScenarioSpec replay_spec(uint64_t seed, ReplayCase c, Duration delta) {
  auto s = base(c == ReplayCase::A ? "replay-a" : "replay-b", seed, TierMode::Both);
  const Duration d = s.services[0].nb_validity;
  auto record = act(ActionKind::Record);
  record.tag = "broadcast";
  // Mallory pulls the first broadcast herself, keeps Alice from hearing live adverts, and
  // replays the recorded broadcast to her later.
  s.adversary.rules.push_back(rule("ADVERT", {act(ActionKind::Fetch)}, 0));
  if (c == ReplayCase::A) {
    s.adversary.rules.push_back(rule("BNONCE_FETCH_RESP", {record, replay_self(d + delta)}, 0));
    s.agents[0].enabled_at = d + delta - std::chrono::milliseconds(500);
  } else {
    Duration first = d / 2;
    s.adversary.rules.push_back(rule("BNONCE_FETCH_RESP",
                                     {record, replay_self(first), replay_self(first + std::chrono::seconds(1))}, 0));
    s.agents[0].enabled_at = first - std::chrono::milliseconds(500);
  }
  s.adversary.rules.push_back(rule("ADVERT", {act(ActionKind::Drop)}));
  return s;
}

ScenarioSpec wormhole_spec(uint64_t seed, WormholeVariant variant, bool identical_beacons) {
  ScenarioSpec s;
  s.seed = seed;
  s.locations = {"l", "p"};
  ServiceSpec svc_p;
  svc_p.name = "service-p";
  svc_p.location = "p";
  svc_p.beacon_id = identical_beacons ? kBeaconL : kBeaconP;
  AgentSpec agent;
  agent.location = "l";
  agent.tier = TierMode::Both;
  s.adversary.listen = {"l", "p"};
  if (variant == WormholeVariant::ReplayToP) {
    s.name = "wormhole-replay";
    ServiceSpec svc_l;
    svc_l.name = "service-l";
    svc_l.location = "l";
    svc_l.beacon_id = kBeaconL;
    s.services = {svc_l, svc_p};
    agent.name = "bob";
    agent.user_id = "bob@example.org";
    s.adversary.rules.push_back(rule("", {relay_to("p")}, std::nullopt, Origin::Agent, "l"));
  } else {
    s.name = "wormhole-extend";
    s.services = {svc_p};
    agent.name = "alice";
    agent.user_id = "alice@example.org";
    s.adversary.rules.push_back(rule("", {relay_to("p")}, std::nullopt, Origin::Agent, "l"));
    s.adversary.rules.push_back(rule("", {relay_to("l")}, std::nullopt, Origin::Service, "p"));
  }
  s.agents = {agent};
  return s;
}

ScenarioSpec dos_spec(uint64_t seed, int flood_factor) {
  auto s = base("dos", seed, TierMode::Both);
  if (flood_factor > 0) {
    auto inject = act(ActionKind::Inject);
    inject.count = flood_factor;
    inject.random_length = 64;
    inject.delay = std::chrono::microseconds(500);
    s.adversary.rules.push_back(
        rule("KE_REQ", {replay_self(std::chrono::microseconds(100), flood_factor), inject}, 0, Origin::Agent));
  }
  return s;
}

ScenarioOutcome scenario_eavesdrop(uint64_t seed, TierMode tier) { return run_scenario(eavesdrop_spec(seed, tier)); }
ScenarioOutcome scenario_mitm(uint64_t seed, MitmVariant variant) { return run_scenario(mitm_spec(seed, variant)); }
ScenarioOutcome scenario_replay(uint64_t seed, ReplayCase c, Duration delta) {
  return run_scenario(replay_spec(seed, c, delta));
}
ScenarioOutcome scenario_wormhole(uint64_t seed, WormholeVariant variant) {
  return run_scenario(wormhole_spec(seed, variant));
}
ScenarioOutcome scenario_dos_duplicates(uint64_t seed, int flood_factor) {
  return run_scenario(dos_spec(seed, flood_factor));
}

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names{"eavesdrop",       "mitm",           "replay-a", "replay-b",
                                              "wormhole-replay", "wormhole-extend", "dos"};
  return names;
}

std::optional<ScenarioSpec> catalog_spec(std::string_view name, uint64_t seed) {
  if (name == "eavesdrop") return eavesdrop_spec(seed);
  if (name == "mitm") return mitm_spec(seed);
  if (name == "replay-a") return replay_spec(seed, ReplayCase::A);
  if (name == "replay-b") return replay_spec(seed, ReplayCase::B);
  if (name == "wormhole-replay") return wormhole_spec(seed, WormholeVariant::ReplayToP);
  if (name == "wormhole-extend") return wormhole_spec(seed, WormholeVariant::RangeExtension);
  if (name == "dos") return dos_spec(seed);
  return std::nullopt;
}

Verdict judge(std::string_view name, const ScenarioOutcome& o) {
  auto count = [&](auto pred) { return std::count_if(o.sessions.begin(), o.sessions.end(), pred); };
  auto responders_at = [&](const std::string& loc, bool established) {
    return count([&](const SessionOutcome& s) {
      return s.role == Role::Responder && s.location == loc && (!established || s.phase == Phase::Established);
    });
  };
  auto all_agents = [&](Phase p) {
    return !o.agents.empty() &&
           std::all_of(o.agents.begin(), o.agents.end(), [&](const AgentOutcome& a) { return a.phase == p; });
  };
  auto all_sessions_failed = [&] {
    return std::all_of(o.sessions.begin(), o.sessions.end(),
                       [](const SessionOutcome& s) { return s.phase == Phase::Failed; });
  };

  std::ostringstream observed;
  observed << "flags=" << o.flags.impersonated_initiator << o.flags.impersonated_responder << o.flags.learned_plaintext
           << o.flags.session_hijacked << " spoofed=" << o.location_spoofed
           << " established_i=" << o.established(Role::Initiator) << " established_r=" << o.established(Role::Responder)
           << " sessions=" << o.sessions.size();

  Verdict v;
  v.observed = observed.str();
  const bool clean = !o.flags.any() && !o.location_spoofed;
  if (name == "eavesdrop") {
    v.expected = "all agents established, no goal flag";
    v.matches = clean && all_agents(Phase::Established);
  } else if (name == "mitm") {
    v.expected = "every session failed, no goal flag";
    v.matches = clean && !o.sessions.empty() && all_sessions_failed();
  } else if (name == "replay-a") {
    v.expected = "responder rejects the stale broadcast, no goal flag";
    v.matches = clean && responders_at("l", false) >= 1 && all_sessions_failed();
  } else if (name == "replay-b") {
    auto duplicates = std::count_if(o.log.begin(), o.log.end(), [](const LogEntry& e) {
      return e.kind == "rx" && e.note == "duplicate broadcast" && e.disposition == "ignore";
    });
    v.expected = "one honest session established, duplicate ignored, no goal flag";
    v.matches = clean && all_agents(Phase::Established) && responders_at("l", false) == 1 &&
                responders_at("l", true) == 1 && duplicates >= 1;
  } else if (name == "wormhole-replay") {
    v.expected = "no session established at p, no goal flag";
    v.matches = clean && responders_at("p", true) == 0 && responders_at("p", false) >= 1 &&
                all_agents(Phase::Established);
  } else if (name == "wormhole-extend") {
    v.expected = "relay session established at p (known limitation), no other goal flag";
    v.matches = !o.flags.any() && o.location_spoofed && responders_at("p", true) == 1;
  } else if (name == "dos") {
    v.expected = "one honest session established, floods ignored or rejected, no goal flag";
    v.matches = clean && all_agents(Phase::Established) && responders_at("l", false) == 1;
  } else {
    v.expected = "unknown scenario";
  }
  return v;
}

// ---------------------------------------------------------------------------
// Forward-secrecy reconstruction oracle

ReconstructionResult reconstruct_key_schedules(const std::vector<Bytes>& frames, const CompromisedSecrets& secrets,
                                               Timestamp now) {
  ReconstructionResult result;
  std::optional<Block32> n_i, n_r;
  std::optional<Point> ke_i, ke_r;
  std::optional<Bytes> n_b;
  SessionIds ids;
  std::vector<ProtocolMessage> sealed;
  for (const auto& f : frames) {
    ProtocolMessage m;
    try {
      m = ProtocolMessage::decode(f);
    } catch (const Error&) {
      continue;
    }
    try {
      if (m.type == MsgType::BnonceFetchResp && m.sections.size() >= 2) {
        n_b = default_abe_scheme().decrypt(secrets.abe_keys, AbeCiphertext::decode(m.sections[1]), now);
      } else if (m.type == MsgType::KeReq && m.sections.size() == 4) {
        n_i.emplace();
        std::copy_n(m.sections[1].begin(), 32, n_i->begin());
        ke_i = Point::decode(m.sections[2]);
        ids.spi_i = m.ids.spi_i;
      } else if (m.type == MsgType::KeResp && m.sections.size() == 2) {
        n_r.emplace();
        std::copy_n(m.sections[0].begin(), 32, n_r->begin());
        ke_r = Point::decode(m.sections[1]);
        ids.spi_r = m.ids.spi_r;
      } else if (m.sections.size() == 1 && !is_all_zero(m.ids.spi_r)) {
        sealed.push_back(m);
      }
    } catch (const Error&) {
    }
  }
  if (!n_i || !n_r || !ke_i || !ke_r) return result;

  // Every scalar the attacker can name from the compromised material and the public transcript.
  std::vector<Scalar> scalars{Scalar::from_u64(1), Scalar::reduce(secrets.user_key), Scalar::reduce(secrets.spwd),
                              Scalar::reduce(secrets.token_seed.seed), Scalar::reduce(secrets.service_seed),
                              Scalar::reduce(*n_i), Scalar::reduce(*n_r)};
  if (n_b) scalars.push_back(Scalar::reduce(*n_b));
  if (!secrets.spwd.empty()) scalars.push_back(Scalar::reduce(derive_kpwd(secrets.spwd, *n_i, *n_r, ids).bytes()));
  for (const auto& k : secrets.abe_keys)
    for (const auto& [attr, share] : k.shares) scalars.push_back(share);

  std::vector<Point> bases{Point::generator(), *ke_i, *ke_r, *ke_i + *ke_r};
  std::vector<Point> candidates;
  for (const auto& b : bases)
    for (const auto& k : scalars)
      if (!k.is_zero()) candidates.push_back(k * b);

  for (const auto& p : candidates) {
    if (p.is_identity()) continue;
    auto ks = derive_sks(compute_keyseed(p, *n_i, *n_r), *n_i, *n_r, ids);
    for (const auto& m : sealed) {
      for (auto role : {Role::Initiator, Role::Responder}) {
        try {
          open(m, ks, role);
          ++result.frames_opened;
        } catch (const Error&) {
        }
      }
    }
    result.candidates.push_back(std::move(ks));
  }
  return result;
}

}  // namespace locathe::sim
