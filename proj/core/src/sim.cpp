#include "locathe/sim.hpp"

#include <algorithm>
#include <set>

#include "locathe/error.hpp"

namespace locathe::sim {
namespace {

constexpr Timestamp kEpoch = at_seconds(1'700'000'000);
constexpr std::size_t kMinSecretSize = 8;

std::string type_name(ByteView bytes) {
  auto t = peek_type(bytes);
  return t ? std::string(to_string(*t)) : "?";
}

std::optional<ProtocolMessage> try_decode(ByteView bytes) {
  try {
    return ProtocolMessage::decode(bytes);
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool same_session(const SessionIds& a, const SessionIds& b) { return a.spi_i == b.spi_i && a.spi_r == b.spi_r; }

}  // namespace

// ---------------------------------------------------------------------------
// VirtualClock

void VirtualClock::schedule(Timestamp at, Event event, bool background) {
  if (at < now_) at = now_;
  if (!background) ++foreground_;
  queue_.push({at, seq_++, background, std::move(event)});
}

bool VirtualClock::step() {
  if (queue_.empty()) return false;
  Entry e = queue_.top();
  queue_.pop();
  now_ = e.at;
  if (!e.background) --foreground_;
  e.event();
  return true;
}

std::optional<Timestamp> VirtualClock::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().at;
}

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::Service: return "service";
    case Origin::Agent: return "agent";
    case Origin::Adversary: return "adversary";
  }
  return "?";
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Forward: return "forward";
    case ActionKind::Drop: return "drop";
    case ActionKind::Record: return "record";
    case ActionKind::Replay: return "replay";
    case ActionKind::Modify: return "modify";
    case ActionKind::Inject: return "inject";
    case ActionKind::Relay: return "relay";
    case ActionKind::Fetch: return "fetch";
  }
  return "?";
}

ActionKind parse_action(std::string_view name) {
  for (auto k : {ActionKind::Forward, ActionKind::Drop, ActionKind::Record, ActionKind::Replay, ActionKind::Modify,
                 ActionKind::Inject, ActionKind::Relay, ActionKind::Fetch})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::ScenarioMisconfigured, "unknown action " + std::string(name));
}

std::size_t ScenarioOutcome::established(Role role) const {
  return std::count_if(sessions.begin(), sessions.end(),
                       [&](const SessionOutcome& s) { return s.role == role && s.phase == Phase::Established; });
}

// ---------------------------------------------------------------------------
// Nodes

struct World::ServiceNode {
  ServiceSpec spec;
  DeterministicRandom rng;
  std::unique_ptr<ServiceEndpoint> endpoint;

  ServiceNode(ServiceSpec s, DeterministicRandom r) : spec(std::move(s)), rng(std::move(r)) {}
};

struct World::AgentNode {
  AgentSpec spec;
  DeterministicRandom rng;
  RegistrationBundle bundle;
  std::vector<std::unique_ptr<InitiatorSession>> sessions;
  int attempts = 0;
  std::optional<ErrorCode> last_error;
  std::set<Bytes> answered;
  std::optional<Timestamp> fetching_since;

  AgentNode(AgentSpec s, DeterministicRandom r) : spec(std::move(s)), rng(std::move(r)) {}

  InitiatorSession* current() const { return sessions.empty() ? nullptr : sessions.back().get(); }
  bool busy() const { return current() && !is_terminal(current()->phase()); }
  bool idle() const { return !busy() && attempts < spec.max_attempts; }
  bool done() const { return !busy() && attempts >= spec.max_attempts; }
};

// Mallory. Sees frames and the clock, nothing else.
struct World::Adversary {
  struct Mitm {
    Block32 n_i{}, n_r{};
    Point ke_i, ke_r;
    std::optional<Scalar> toward_service, toward_agent;
    std::optional<KeySchedule> agent_leg, service_leg;
    SessionIds ids;
  };

  AdversarySpec spec;
  DeterministicRandom rng;
  std::vector<std::size_t> match_counts;
  std::map<std::string, std::vector<Bytes>> recorded;
  Mitm mitm;

  Adversary(AdversarySpec s, DeterministicRandom r) : spec(std::move(s)), rng(std::move(r)) {
    match_counts.assign(spec.rules.size(), 0);
  }

  bool listens(const std::string& location) const {
    return std::find(spec.listen.begin(), spec.listen.end(), location) != spec.listen.end();
  }

  bool matches(std::size_t i, const Frame& f) {
    const auto& m = spec.rules[i].match;
    if (!m.type.empty() && m.type != type_name(f.bytes)) return false;
    if (!m.location.empty() && m.location != f.location) return false;
    if (m.origin && *m.origin != f.origin) return false;
    std::size_t seen = match_counts[i]++;
    return !m.nth || *m.nth == seen;
  }

  Bytes transform(const ActionSpec& a, Bytes bytes) {
    if (a.transform == "flip_bit") {
      if (!bytes.empty()) bytes[a.offset % bytes.size()] ^= 0x01;
      return bytes;
    }
    if (a.transform == "mitm_ke") return reseal(std::move(bytes));
    throw Error(ErrorCode::ScenarioMisconfigured, "unknown transform " + a.transform);
  }

  // Substitutes both KE values with Mallory's own, then re-encrypts every sealed message
  // between the two legs she now shares keys with.
  Bytes reseal(Bytes bytes) {
    auto msg = try_decode(bytes);
    if (!msg) return bytes;
    try {
      if (msg->type == MsgType::KeReq && msg->sections.size() == 4) {
        mitm = {};
        std::copy_n(msg->sections[1].begin(), 32, mitm.n_i.begin());
        mitm.ke_i = Point::decode(msg->sections[2]);
        auto kp = ecdhe_keypair(rng);
        mitm.toward_service = kp.secret;
        msg->sections[2] = to_bytes(kp.public_point.encode());
        return msg->encode();
      }
      if (msg->type == MsgType::KeResp && msg->sections.size() == 2 && mitm.toward_service) {
        std::copy_n(msg->sections[0].begin(), 32, mitm.n_r.begin());
        mitm.ke_r = Point::decode(msg->sections[1]);
        mitm.ids = msg->ids;
        auto kp = ecdhe_keypair(rng);
        mitm.toward_agent = kp.secret;
        msg->sections[1] = to_bytes(kp.public_point.encode());
        auto leg = [&](const Scalar& mine, const Point& theirs) {
          auto seed = compute_keyseed(dh(mine, theirs), mitm.n_i, mitm.n_r);
          return derive_sks(seed, mitm.n_i, mitm.n_r, mitm.ids);
        };
        mitm.agent_leg = leg(*mitm.toward_agent, mitm.ke_i);
        mitm.service_leg = leg(*mitm.toward_service, mitm.ke_r);
        return msg->encode();
      }
      if (mitm.agent_leg && same_session(msg->ids, mitm.ids) && msg->sections.size() == 1) {
        bool from_agent = msg->type == MsgType::T1AuthReq || msg->type == MsgType::T2Msg1 ||
                          msg->type == MsgType::FinalAuthReq;
        bool from_service = msg->type == MsgType::T1AuthResp || msg->type == MsgType::T2Msg2 ||
                            msg->type == MsgType::FinalAuthResp;
        if (msg->type == MsgType::Error) {
          try {
            auto inner = open(*msg, *mitm.agent_leg, Role::Initiator);
            return seal(msg->type, msg->ids, msg->counter, inner, *mitm.service_leg, Role::Initiator).encode();
          } catch (const Error&) {
          }
          from_service = true;
        }
        if (from_agent) {
          auto inner = open(*msg, *mitm.agent_leg, Role::Initiator);
          return seal(msg->type, msg->ids, msg->counter, inner, *mitm.service_leg, Role::Initiator).encode();
        }
        if (from_service) {
          auto inner = open(*msg, *mitm.service_leg, Role::Responder);
          return seal(msg->type, msg->ids, msg->counter, inner, *mitm.agent_leg, Role::Responder).encode();
        }
      }
    } catch (const Error&) {
    }
    return bytes;
  }
};

// ---------------------------------------------------------------------------
// World

World::World(ScenarioSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
  spec_.validate();
  auto registry_rng = rng_.fork("registry");
  registry_ = std::make_unique<ServiceRegistry>(
      RegistryConfig{"locathe-service", kDefaultExpiry, spec_.kdf_iterations}, registry_rng);
  for (const auto& [authority, attrs] : spec_.authorities) registry_->add_authority(authority, attrs, registry_rng);

  auto observer_for = [this](const std::string& owner) {
    return [this, owner](std::string_view label, ByteView value) {
      secrets_.push_back({owner, std::string(label), to_bytes(value)});
    };
  };

  for (const auto& s : spec_.services) {
    auto node = std::make_unique<ServiceNode>(s, rng_.fork("service:" + s.name));
    EndpointConfig cfg{BeaconConfig{s.beacon_id, s.location, s.broadcast_interval, s.nb_validity,
                                    AccessPolicy::parse(s.policy)},
                       kDefaultAuthErrorDelay, 0, {}};
    cfg.auth_error_delay = s.auth_error_delay;
    cfg.session.observer = observer_for(s.name);
    node->endpoint = std::make_unique<ServiceEndpoint>(*registry_, std::move(cfg), node->rng);
    services_.push_back(std::move(node));
  }

  std::map<std::string, RegistrationBundle> issued;
  for (const auto& a : spec_.agents) {
    auto node = std::make_unique<AgentNode>(a, rng_.fork("agent:" + a.name));
    auto it = issued.find(a.user_id);
    if (it == issued.end()) {
      std::vector<Attribute> attrs;
      for (const auto& text : a.attributes) attrs.push_back(Attribute::parse(text));
      auto bundle = registry_->register_user(a.user_id, AttributeSet(attrs.begin(), attrs.end()), std::nullopt,
                                             kEpoch, registry_rng);
      it = issued.emplace(a.user_id, std::move(bundle)).first;
    }
    node->bundle = it->second;
    if (a.wrong_password) node->bundle.spwd[0] ^= 0x01;
    if (a.unregistered) node->bundle.user_id += "-unregistered";
    agents_.push_back(std::move(node));
  }

  for (const auto& r : registry_->records()) {
    secrets_.push_back({r.user_id, "user_key", r.user_key});
    secrets_.push_back({r.user_id, "spwd", r.spwd});
    secrets_.push_back({r.user_id, "token_seed", r.token_seed.seed});
    secrets_.push_back({r.user_id, "user_id", to_bytes(r.user_id)});
    for (const auto& k : r.abe_keys)
      for (const auto& [attr, share] : k.shares) secrets_.push_back({r.user_id, "abe_share", to_bytes(share.to_bytes())});
  }
  secrets_.push_back({"service", "signing_seed", to_bytes(registry_->signing_key().seed())});

  adversary_ = std::make_unique<Adversary>(spec_.adversary, rng_.fork("adversary"));
}

World::~World() = default;

void World::log(const Frame& f, std::string kind, std::string node, std::string disposition, std::string note) {
  if (!disposition.empty()) ++dispositions_[disposition];
  log_.push_back({clock_.now(), f.location, std::move(kind), std::move(node), type_name(f.bytes), f.bytes.size(),
                  std::move(disposition), std::move(note)});
}

void World::send_from(const std::string& node, const std::string& location, Origin origin, Bytes bytes,
                      Duration delay) {
  Frame f;
  f.location = location;
  f.sender = node;
  f.origin = origin;
  f.bytes = std::move(bytes);
  clock_.schedule(clock_.now() + delay, [this, f = std::move(f)]() mutable { transmit(std::move(f)); });
}

void World::transmit(Frame frame) {
  frame.id = next_frame_++;
  frame.time = clock_.now();
  if (frame.origin == Origin::Adversary) {
    frame.forged = !honest_bytes_.count(frame.bytes);
  } else {
    honest_bytes_.insert(frame.bytes);
  }
  frames_.push_back(frame);
  log(frame, "tx", frame.sender);

  if (frame.origin == Origin::Adversary || !adversary_->listens(frame.location)) {
    deliver(frame);
    return;
  }

  bool drop = false;
  std::optional<Bytes> replaced;
  const Bytes original = frame.bytes;
  for (std::size_t i = 0; i < adversary_->spec.rules.size(); ++i) {
    if (!adversary_->matches(i, frame)) continue;
    for (const auto& a : adversary_->spec.rules[i].actions) {
      const std::string& where = a.location.empty() ? frame.location : a.location;
      switch (a.kind) {
        case ActionKind::Forward: break;
        case ActionKind::Drop: drop = true; break;
        case ActionKind::Record:
          adversary_->recorded[a.tag].push_back(original);
          log(frame, "record", "mallory", {}, a.tag);
          break;
        case ActionKind::Replay: {
          std::vector<Bytes> src{original};
          if (!a.tag.empty()) src = adversary_->recorded[a.tag];
          for (int n = 0; n < a.count; ++n)
            for (const auto& b : src) send_from("mallory", where, Origin::Adversary, b, a.delay);
          break;
        }
        case ActionKind::Modify: replaced = adversary_->transform(a, replaced.value_or(original)); break;
        case ActionKind::Inject:
          for (int n = 0; n < a.count; ++n) {
            Bytes b = a.bytes.empty() ? adversary_->rng.bytes(a.random_length) : a.bytes;
            send_from("mallory", where, Origin::Adversary, std::move(b), a.delay);
          }
          break;
        case ActionKind::Relay:
          send_from("mallory", where, Origin::Adversary, replaced.value_or(original), a.delay);
          log(frame, "relay", "mallory", {}, where);
          break;
        case ActionKind::Fetch:
          try {
            auto advert = Advert::decode(original);
            send_from("mallory", where, Origin::Adversary, make_fetch_request(advert.handle).encode(), a.delay);
          } catch (const Error&) {
          }
          break;
      }
    }
  }
  if (drop) {
    log(frame, "drop", "mallory");
    return;
  }
  if (replaced && *replaced != original) {
    Frame forged = frame;
    forged.id = next_frame_++;
    forged.origin = Origin::Adversary;
    forged.sender = "mallory";
    forged.bytes = std::move(*replaced);
    forged.forged = true;
    frames_.push_back(forged);
    log(forged, "modify", "mallory");
    deliver(forged);
    return;
  }
  deliver(frame);
}

void World::deliver(const Frame& frame) {
  const Timestamp now = clock_.now();
  for (auto& s : services_) {
    if (s->spec.location != frame.location || s->spec.name == frame.sender) continue;
    auto r = s->endpoint->handle(frame.bytes, now);
    log(frame, "rx", s->spec.name, std::string(to_string(r.disposition)));
    if (frame.forged && r.disposition == Disposition::Process) {
      if (auto msg = try_decode(frame.bytes)) {
        for (const auto* sess : s->endpoint->sessions())
          if (sess->ids().spi_i == msg->ids.spi_i &&
              (is_all_zero(msg->ids.spi_r) || sess->ids().spi_r == msg->ids.spi_r))
            tainted_.emplace_back(s->spec.name, sess->ids());
      }
    }
    for (auto& out : r.replies) send_from(s->spec.name, s->spec.location, Origin::Service, out.wire, out.delay);
    if (r.disposition == Disposition::Process || r.disposition == Disposition::Error) {
      auto* endpoint = s->endpoint.get();
      clock_.schedule(now + kDefaultSessionTimeout, [this, endpoint] { endpoint->expire(clock_.now()); }, true);
    }
  }

  for (auto& a : agents_) {
    if (a->spec.location != frame.location || a->spec.name == frame.sender) continue;
    if (now < kEpoch + a->spec.enabled_at) continue;
    Disposition d = Disposition::Ignore;
    std::string note;
    auto type = peek_type(frame.bytes);
    if (type == MsgType::Advert) {
      bool stale_fetch = !a->fetching_since || now - *a->fetching_since > std::chrono::seconds(1);
      if (a->idle() && stale_fetch) {
        try {
          auto advert = Advert::decode(frame.bytes);
          a->fetching_since = now;
          send_from(a->spec.name, a->spec.location, Origin::Agent, make_fetch_request(advert.handle).encode(), {});
          d = Disposition::Process;
        } catch (const Error&) {
          d = Disposition::Reject;
        }
      }
    } else if (type == MsgType::BnonceFetchResp) {
      auto msg = try_decode(frame.bytes);
      if (!msg || msg->sections.size() < 2) {
        d = Disposition::Reject;
      } else if (a->answered.count(msg->sections[1])) {
        note = "duplicate broadcast";
      } else if (a->idle()) {
        a->answered.insert(msg->sections[1]);
        a->fetching_since.reset();
        ++a->attempts;
        try {
          InitiatorOptions opts{a->spec.tier, {}, a->spec.clock_skew, {}};
          opts.session.observer = [this, owner = a->spec.name](std::string_view label, ByteView value) {
            secrets_.push_back({owner, std::string(label), to_bytes(value)});
          };
          auto started = InitiatorSession::start(a->bundle, frame.bytes, std::move(opts), now, a->rng);
          a->sessions.push_back(std::move(started.session));
          send_from(a->spec.name, a->spec.location, Origin::Agent, std::move(started.ke_req), {});
          d = Disposition::Process;
        } catch (const Error& e) {
          a->last_error = e.code();
          d = Disposition::Error;
          note = std::string(locathe::to_string(e.code()));
        }
      }
    } else if (auto* session = a->current()) {
      auto r = session->handle(frame.bytes, now);
      d = r.disposition;
      for (auto& out : r.replies) send_from(a->spec.name, a->spec.location, Origin::Agent, out.wire, out.delay);
      if (session->failure()) a->last_error = session->failure();
    }
    if (frame.forged && d == Disposition::Process && a->current())
      tainted_.emplace_back(a->spec.name, a->current()->ids());
    if (auto* session = a->current(); session && d != Disposition::Ignore && !is_terminal(session->phase())) {
      clock_.schedule(session->deadline(), [this, session, node = a.get()] {
        if (session->expire(clock_.now())) node->last_error = ErrorCode::Timeout;
      }, true);
    }
    log(frame, "rx", a->spec.name, std::string(to_string(d)), note);
  }
}

// Timers and beacons are background events: a run ends once no frame is in flight, every
// agent is done and no responder session is still waiting.
bool World::quiescent() const {
  if (clock_.pending_foreground() > 0) return false;
  if (!std::all_of(agents_.begin(), agents_.end(), [](const auto& a) { return a->done(); })) return false;
  for (const auto& s : services_)
    for (const auto* r : s->endpoint->sessions())
      if (!is_terminal(r->phase())) return false;
  return true;
}

void World::schedule_beacon(ServiceNode* node, Timestamp at, Timestamp end) {
  clock_.schedule(
      at,
      [this, node, end] {
        Bytes advert = node->endpoint->beacon_tick(clock_.now());
        node->endpoint->expire(clock_.now());
        Frame f;
        f.location = node->spec.location;
        f.sender = node->spec.name;
        f.origin = Origin::Service;
        f.bytes = std::move(advert);
        transmit(std::move(f));
        Timestamp next = clock_.now() + node->spec.broadcast_interval;
        if (next < end) schedule_beacon(node, next, end);
      },
      true);
}

ScenarioOutcome World::run() {
  const Timestamp end = kEpoch + spec_.until;
  for (auto& s : services_) schedule_beacon(s.get(), kEpoch, end);
  while (auto next = clock_.next_time()) {
    if (*next > end) break;
    clock_.step();
    if (quiescent()) break;
  }
  return collect();
}

std::vector<const Frame*> World::adversary_view() const {
  std::vector<const Frame*> out;
  for (const auto& f : frames_)
    if (f.origin == Origin::Adversary || adversary_->listens(f.location)) out.push_back(&f);
  return out;
}

std::vector<SessionTruth> World::session_truth() const {
  std::vector<SessionTruth> out;
  auto add = [&](const std::string& node, const Session& s) {
    out.push_back({node, s.role(), s.ids(), s.phase(), s.key_schedule(), s.long_term_secret()});
  };
  for (const auto& a : agents_)
    for (const auto& s : a->sessions) add(a->spec.name, *s);
  for (const auto& s : services_)
    for (const auto* r : s->endpoint->sessions()) add(s->spec.name, *r);
  return out;
}

std::vector<Bytes> World::session_frames(const SessionIds& ids) const {
  Bytes fetch_response;
  for (const auto& s : services_)
    for (const auto* r : s->endpoint->sessions())
      if (same_session(r->ids(), ids)) fetch_response = r->record().fetch_response;
  std::vector<Bytes> out;
  std::set<Bytes> seen;
  for (const auto& f : frames_) {
    auto msg = try_decode(f.bytes);
    if (!msg || seen.count(f.bytes)) continue;
    bool match = msg->ids.spi_i == ids.spi_i && (msg->ids.spi_r == ids.spi_r || is_all_zero(msg->ids.spi_r));
    if (f.bytes == fetch_response || (match && !is_all_zero(ids.spi_i))) {
      seen.insert(f.bytes);
      out.push_back(f.bytes);
    }
  }
  return out;
}

GoalFlags World::compute_flags(bool& location_spoofed) const {
  GoalFlags flags;
  location_spoofed = false;
  struct Live {
    std::string node, location;
    const Session* session;
  };
  std::vector<Live> initiators, responders;
  for (const auto& a : agents_)
    for (const auto& s : a->sessions) initiators.push_back({a->spec.name, a->spec.location, s.get()});
  for (const auto& s : services_)
    for (const auto* r : s->endpoint->sessions()) responders.push_back({s->spec.name, s->spec.location, r});

  auto partner = [](const Live& x, const std::vector<Live>& others) -> const Live* {
    for (const auto& o : others)
      if (o.session->phase() == Phase::Established && same_session(o.session->ids(), x.session->ids()) &&
          o.session->key_schedule() == x.session->key_schedule())
        return &o;
    return nullptr;
  };
  auto is_tainted = [&](const Live& x) {
    return std::any_of(tainted_.begin(), tainted_.end(), [&](const auto& t) {
      return t.first == x.node && same_session(t.second, x.session->ids());
    });
  };

  for (const auto& r : responders) {
    if (r.session->phase() != Phase::Established) continue;
    const Live* p = partner(r, initiators);
    if (!p) flags.impersonated_initiator = true;
    else if (p->location != r.location) location_spoofed = true;
    if (is_tainted(r)) flags.session_hijacked = true;
  }
  for (const auto& i : initiators) {
    if (i.session->phase() != Phase::Established) continue;
    if (!partner(i, responders)) flags.impersonated_responder = true;
    if (is_tainted(i)) flags.session_hijacked = true;
  }

  auto view = adversary_view();
  for (const auto& s : secrets_) {
    if (s.value.size() < kMinSecretSize) continue;
    for (const auto* f : view)
      if (contains_subsequence(f->bytes, s.value)) flags.learned_plaintext = true;
  }
  return flags;
}

ScenarioOutcome World::collect() const {
  ScenarioOutcome out;
  out.name = spec_.name;
  out.seed = spec_.seed;
  out.finished_at = clock_.now();
  for (const auto& a : agents_) {
    AgentOutcome ao{a->spec.name, a->spec.location, a->attempts, a->last_error, Phase::AwaitBroadcast};
    if (auto* s = a->current()) ao.phase = s->phase();
    out.agents.push_back(ao);
  }
  auto add = [&](const std::string& node, const std::string& location, const Session& s,
                 std::optional<std::string> peer) {
    out.sessions.push_back({node, s.role(), location, s.ids(), s.phase(), s.failure(), s.failed_in(), std::move(peer),
                            s.sent_transcript(), s.received_transcript()});
  };
  for (const auto& a : agents_)
    for (const auto& s : a->sessions) add(a->spec.name, a->spec.location, *s, std::nullopt);
  for (const auto& s : services_)
    for (const auto* r : s->endpoint->sessions()) add(s->spec.name, s->spec.location, *r, r->peer_user_id());
  out.flags = compute_flags(out.location_spoofed);
  out.dispositions = dispositions_;
  out.log = log_;
  return out;
}

ScenarioOutcome run_scenario(const ScenarioSpec& spec) {
  World world(spec);
  return world.run();
}

}  // namespace locathe::sim
