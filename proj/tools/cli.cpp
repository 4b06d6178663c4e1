#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "locathe/error.hpp"
#include "locathe/protocol.hpp"
#include "locathe/sim.hpp"

namespace locathe::cli {
namespace {

using json = nlohmann::json;

constexpr Timestamp kDemoEpoch = at_seconds(1'700'000'000);
constexpr std::string_view kDemoUser = "demo-user";

struct Options {
  std::string registry = "locathe-registry.json";
  std::optional<uint64_t> seed;
  std::string tier = "both";
  std::string output = "-";
  std::string format;
  std::optional<double> at;
};

std::unique_ptr<RandomSource> make_rng(const Options& o) {
  if (o.seed) return std::make_unique<DeterministicRandom>(*o.seed);
  return std::make_unique<SystemRandom>();
}

Timestamp now_of(const Options& o) {
  if (o.at) return at_seconds(*o.at);
  auto us = std::chrono::duration_cast<Duration>(std::chrono::system_clock::now().time_since_epoch());
  return Timestamp(us);
}

/// "-" is standard output.
void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.output == "-") {
    out << text;
    return;
  }
  std::ofstream f(o.output, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) throw Error(ErrorCode::Io, "cannot write " + o.output);
}

std::string format_of(const Options& o, std::string_view fallback) {
  return o.format.empty() ? std::string(fallback) : o.format;
}

std::string_view stage_name(Phase p) {
  switch (p) {
    case Phase::AwaitBroadcast:
      return "broadcast";
    case Phase::AwaitKe:
      return "ke";
    case Phase::AwaitT1:
      return "tier1";
    case Phase::AwaitT2:
    case Phase::AwaitT2Resp:
      return "tier2";
    case Phase::AwaitFinal:
      return "final";
    case Phase::Established:
    case Phase::Failed:
      break;
  }
  return "none";
}

/// Unreadable and malformed registry files are both I/O failures.
std::unique_ptr<ServiceRegistry> load_registry(const std::string& path) {
  try {
    return ServiceRegistry::load(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(ErrorCode::Io, path + ": " + e.what());
  }
}

// register

struct RegisterArgs {
  std::string user_id;
  std::string attrs = "city:resident";
  std::optional<std::string> password;
  std::optional<std::string> relying_party;
  std::vector<std::string> authorities;
};

void ensure_authority(ServiceRegistry& reg, const std::string& spec, RandomSource& rng) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::Format, "authority must be name=attr,attr");
  std::string name = spec.substr(0, eq);
  std::vector<std::string> attrs;
  std::stringstream ss(spec.substr(eq + 1));
  for (std::string a; std::getline(ss, a, ',');)
    if (!a.empty()) attrs.push_back(a);
  auto ids = reg.authority_ids();
  if (std::find(ids.begin(), ids.end(), name) == ids.end()) {
    reg.add_authority(name, attrs, rng);
    return;
  }
  auto params = reg.abe_public_params();
  const auto& published = params.authorities.at(name).attributes;
  for (const auto& a : attrs)
    if (!published.count(a)) reg.publish_attribute(name, a);
}

int cmd_register(const Options& o, const RegisterArgs& a, std::ostream& out) {
  auto rng = make_rng(o);
  std::unique_ptr<ServiceRegistry> reg;
  if (std::filesystem::exists(o.registry)) {
    reg = load_registry(o.registry);
  } else {
    reg = std::make_unique<ServiceRegistry>(RegistryConfig{}, *rng);
    reg->add_authority("city", {"resident", "staff", "visitor"}, *rng);
  }
  for (const auto& spec : a.authorities) ensure_authority(*reg, spec, *rng);
  std::optional<ByteView> password;
  if (a.password) password = view(*a.password);
  auto bundle = reg->register_user(a.user_id, AttributeSet::parse(a.attrs), password, now_of(o), *rng,
                                   a.relying_party);
  reg->save(o.registry);
  emit(o, out, bundle.to_json() + "\n");
  return kOk;
}

// registry-list

int cmd_registry_list(const Options& o, std::ostream& out) {
  auto reg = load_registry(o.registry);
  auto now = now_of(o);
  json users = json::array();
  std::ostringstream text;
  for (const auto& r : reg->records()) {
    AttributeSet attrs;
    for (const auto& k : r.abe_keys)
      for (const auto& at : k.attributes()) attrs.insert(at);
    json u{{"user_id", r.user_id},
           {"relying_party_id", r.relying_party_id ? json(*r.relying_party_id) : json(nullptr)},
           {"attributes", attrs.to_string()},
           {"issued_at", whole_seconds(r.issued_at)},
           {"expires_at", whole_seconds(r.expires_at)},
           {"active", r.active_at(now)},
           {"user_key_fp", fingerprint(r.user_key)},
           {"spwd_fp", fingerprint(r.spwd)}};
    text << r.user_id << '\t' << r.relying_party_id.value_or("-") << '\t' << attrs.to_string() << '\t'
         << whole_seconds(r.expires_at) << '\t' << (r.active_at(now) ? "active" : "expired") << '\t'
         << fingerprint(r.user_key) << '\t' << fingerprint(r.spwd) << '\n';
    users.push_back(std::move(u));
  }
  if (format_of(o, "json") == "json") {
    json j{{"service_id", reg->config().service_id},
           {"service_key_fp", fingerprint(reg->signing_key().verify_key().bytes())},
           {"users", users}};
    emit(o, out, j.dump(2) + "\n");
  } else {
    emit(o, out, text.str());
  }
  return kOk;
}

// demo

struct DemoArgs {
  std::optional<std::string> user;
  std::optional<std::string> bundle_path;
  std::string policy = "city:resident";
  std::string attrs = "city:resident";
  bool wrong_password = false;
};

struct WireEntry {
  std::string direction;
  Bytes bytes;
};

json session_json(const Session& s) {
  json j{{"phase", std::string(to_string(s.phase()))}};
  if (s.failure()) {
    j["failure"] = std::string(to_string(*s.failure()));
    j["failed_in"] = std::string(stage_name(s.failed_in()));
  }
  return j;
}

json fingerprints(const Session& s) {
  json f = json::object();
  if (const auto& ks = s.key_schedule()) {
    f["keyseed"] = fingerprint(ks->keyseed);
    f["sk_ei"] = fingerprint(ks->sk_ei.bytes());
    f["sk_ai"] = fingerprint(ks->sk_ai.bytes());
    f["sk_er"] = fingerprint(ks->sk_er.bytes());
    f["sk_ar"] = fingerprint(ks->sk_ar.bytes());
    f["sk_pi"] = fingerprint(ks->sk_pi.bytes());
    f["sk_pr"] = fingerprint(ks->sk_pr.bytes());
  }
  if (const auto& ge = s.ge()) f["ge"] = fingerprint(ge->encode());
  if (const auto& as = s.auth_shared()) f["auth_shared"] = fingerprint(as->encode());
  if (const auto& ltk = s.long_term_secret()) f["long_term_secret"] = fingerprint(ltk->key);
  return f;
}

int cmd_demo(const Options& o, const DemoArgs& a, std::ostream& out, std::ostream& err) {
  auto tier = parse_tier(o.tier);
  DeterministicRandom seeded(o.seed.value_or(1));
  SystemRandom system;
  RandomSource& rng = o.seed ? static_cast<RandomSource&>(seeded) : system;

  std::unique_ptr<ServiceRegistry> reg;
  RegistrationBundle bundle;
  Timestamp now;
  if (a.user || a.bundle_path) {
    reg = load_registry(o.registry);
    now = now_of(o);
    if (a.bundle_path) {
      std::ifstream in(*a.bundle_path, std::ios::binary);
      if (!in) throw Error(ErrorCode::Io, "cannot read " + *a.bundle_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      bundle = RegistrationBundle::from_json(ss.str());
    } else {
      bundle = reg->bundle(*a.user, now);
    }
  } else {
    // Self-contained run: an in-memory registry at a fixed time so seeded output is reproducible.
    now = o.at ? at_seconds(*o.at) : kDemoEpoch;
    reg = std::make_unique<ServiceRegistry>(RegistryConfig{}, rng);
    reg->add_authority("city", {"resident", "staff", "visitor"}, rng);
    bundle = reg->register_user(std::string(kDemoUser), AttributeSet::parse(a.attrs), std::nullopt, now, rng);
  }
  if (a.wrong_password && !bundle.spwd.empty()) bundle.spwd[0] ^= 0x01;

  EndpointConfig cfg{BeaconConfig{{0x4c, 0x4f, 0x43, 0x41, 0x54, 0x48, 0x45, 0x01}, "demo",
                                  kDefaultBroadcastInterval, kDefaultNbValidity, AccessPolicy::parse(a.policy)},
                     kDefaultAuthErrorDelay, 0, {}};
  ServiceEndpoint endpoint(*reg, cfg, rng);

  std::vector<WireEntry> wire;
  std::optional<std::string> start_error;
  std::unique_ptr<InitiatorSession> alice;

  Bytes advert = endpoint.beacon_tick(now);
  wire.push_back({"r2i", advert});
  Bytes fetch_req = make_fetch_request(Advert::decode(advert).handle).encode();
  wire.push_back({"i2r", fetch_req});
  auto fetched = endpoint.handle(fetch_req, now);
  for (const auto& r : fetched.replies) wire.push_back({"r2i", r.wire});

  std::vector<Bytes> to_service;
  try {
    if (fetched.replies.empty()) throw Error(ErrorCode::UnknownHandle, "no fetch response");
    auto s = InitiatorSession::start(bundle, fetched.replies.front().wire, {tier, {}, {}, {}}, now, rng);
    alice = std::move(s.session);
    to_service.push_back(s.ke_req);
    wire.push_back({"i2r", s.ke_req});
  } catch (const Error& e) {
    start_error = e.what();
  }

  // Error replies carry a hold-back; the demo advances time past it.
  while (!to_service.empty()) {
    std::vector<Bytes> to_alice;
    for (const auto& m : to_service)
      for (const auto& r : endpoint.handle(m, now).replies) {
        now += r.delay;
        wire.push_back({"r2i", r.wire});
        to_alice.push_back(r.wire);
      }
    to_service.clear();
    for (const auto& m : to_alice)
      for (const auto& r : alice->handle(m, now).replies) {
        now += r.delay;
        wire.push_back({"i2r", r.wire});
        to_service.push_back(r.wire);
      }
  }

  const ResponderSession* bob = endpoint.session_count() ? endpoint.sessions().front() : nullptr;
  bool ok = alice && bob && alice->phase() == Phase::Established && bob->phase() == Phase::Established;

  std::string failure_phase;
  if (!ok) {
    if (start_error)
      failure_phase = "broadcast";
    else if (bob && bob->phase() == Phase::Failed)
      failure_phase = stage_name(bob->failed_in());
    else if (alice && alice->phase() == Phase::Failed)
      failure_phase = stage_name(alice->failed_in());
    else
      failure_phase = stage_name(alice ? alice->phase() : Phase::AwaitBroadcast);
  }

  json transcript = json::array();
  std::ostringstream hex;
  for (const auto& w : wire) {
    auto type = w.bytes.size() >= 2 && is_known_type(w.bytes[1])
                    ? std::string(to_string(static_cast<MsgType>(w.bytes[1])))
                    : std::string("UNKNOWN");
    transcript.push_back({{"direction", w.direction}, {"type", type}, {"hex", to_hex(w.bytes)}});
    hex << w.direction << '\t' << type << '\t' << to_hex(w.bytes) << '\n';
  }

  if (format_of(o, "json") == "json") {
    json j{{"tier", std::string(to_string(tier))},
           {"seed", o.seed ? json(*o.seed) : json(nullptr)},
           {"user_id", bundle.user_id},
           {"policy", a.policy},
           {"established", ok},
           {"failure_phase", ok ? json(nullptr) : json(failure_phase)},
           {"transcript", transcript}};
    if (start_error) j["start_error"] = *start_error;
    if (alice) {
      j["initiator"] = session_json(*alice);
      j["initiator"]["fingerprints"] = fingerprints(*alice);
    }
    if (bob) {
      j["responder"] = session_json(*bob);
      j["responder"]["fingerprints"] = fingerprints(*bob);
    }
    emit(o, out, j.dump(2) + "\n");
  } else {
    emit(o, out, hex.str());
  }
  if (!ok) {
    err << "handshake failed in stage " << failure_phase;
    if (start_error) err << ": " << *start_error;
    err << '\n';
    return kHandshakeFailed;
  }
  return kOk;
}

// attack

int cmd_attack(const Options& o, const std::string& name, const std::optional<std::string>& file, std::ostream& out,
               std::ostream& err) {
  uint64_t seed = o.seed.value_or(1);
  std::optional<sim::ScenarioSpec> spec;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + *file);
    std::ostringstream ss;
    ss << in.rdbuf();
    spec = sim::ScenarioSpec::from_json(ss.str());
    if (o.seed) spec->seed = *o.seed;
  } else {
    spec = sim::catalog_spec(name, seed);
    if (!spec) {
      err << "unknown scenario '" << name << "'; known:";
      for (const auto& n : sim::catalog_names()) err << ' ' << n;
      err << '\n';
      return kUnknownScenario;
    }
  }
  auto outcome = sim::run_scenario(*spec);
  const auto& catalog = sim::catalog_names();
  bool judged = std::find(catalog.begin(), catalog.end(), spec->name) != catalog.end();
  auto verdict = judged ? sim::judge(spec->name, outcome) : sim::Verdict{true, "none", "custom scenario"};

  json j{{"scenario", spec->name},
         {"outcome", json::parse(outcome.to_json())},
         {"verdict", {{"expected", verdict.expected}, {"observed", verdict.observed}, {"matches", verdict.matches}}}};
  emit(o, out, j.dump(2) + "\n");
  if (!verdict.matches) {
    err << spec->name << ": expected " << verdict.expected << ", observed " << verdict.observed << '\n';
    return kFailure;
  }
  return kOk;
}

// vectors

class VectorSink {
 public:
  VectorSink(uint64_t seed, std::optional<std::string> filter) : base_(seed), filter_(std::move(filter)) {}

  /// An independent stream per op, so filtered output is a subset of the full dump.
  bool wants(const std::string& op) {
    if (filter_ && *filter_ != op) return false;
    rng_ = base_.fork(op);
    op_ = op;
    index_ = 0;
    return true;
  }
  RandomSource& rng() { return *rng_; }

  void add(const std::vector<Bytes>& inputs, ByteView output) {
    std::string name = op_ + "." + std::to_string(index_++);
    std::ostringstream line;
    line << name;
    json in = json::array();
    for (const auto& i : inputs) {
      line << '\t' << to_hex(i);
      in.push_back(to_hex(i));
    }
    line << '\t' << to_hex(output) << '\n';
    text_ += line.str();
    entries_.push_back({{"name", name}, {"inputs", in}, {"output", to_hex(output)}});
  }

  const std::string& text() const { return text_; }
  const json& entries() const { return entries_; }

 private:
  DeterministicRandom base_;
  std::optional<std::string> filter_;
  std::optional<DeterministicRandom> rng_;
  std::string op_;
  int index_ = 0;
  std::string text_;
  json entries_ = json::array();
};

Bytes u32_be(uint32_t v) {
  Bytes b;
  append_u32_be(b, v);
  return b;
}

Bytes u64_be(uint64_t v) {
  Bytes b;
  append_u64_be(b, v);
  return b;
}

Bytes point_bytes(const Point& p) { return to_bytes(p.encode()); }

Point random_point(RandomSource& rng) { return Scalar::random_nonzero(rng) * Point::generator(); }

SessionIds random_ids(RandomSource& rng) { return {rng.array<8>(), rng.array<8>()}; }

void generate_vectors(VectorSink& v) {
  constexpr int kPerOp = 3;
  if (v.wants("prf"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Bytes key = r.bytes(32), data = r.bytes(1 + r.uniform(64));
      v.add({key, data}, prf(PrfKey(key), data));
    }
  if (v.wants("prf_plus"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Bytes key = r.bytes(32), data = r.bytes(1 + r.uniform(64));
      auto len = static_cast<uint32_t>(1 + r.uniform(200));
      v.add({key, data, u32_be(len)}, prf_plus(PrfKey(key), data, len));
    }
  if (v.wants("kdf_stretch"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Bytes secret = r.bytes(32), salt = r.bytes(16);
      uint32_t iters = 1000;
      v.add({secret, salt, u32_be(iters)}, kdf_stretch(secret, salt, iters).bytes());
    }
  if (v.wants("enc_auth"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      SymmetricKey key(r.bytes(32));
      auto nonce = r.array<12>();
      Bytes pt = r.bytes(r.uniform(48)), aad = r.bytes(r.uniform(24));
      v.add({to_bytes(key.bytes()), to_bytes(nonce), pt, aad}, enc_auth(key, nonce, pt, aad));
    }
  if (v.wants("enc_plain"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      SymmetricKey key(r.bytes(32));
      auto nonce = r.array<12>();
      Bytes pt = r.bytes(1 + r.uniform(48));
      v.add({to_bytes(key.bytes()), to_bytes(nonce), pt}, enc_plain(key, nonce, pt));
    }
  if (v.wants("totp"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      TokenSeed seed{r.bytes(20)};
      auto t = static_cast<int64_t>(1'600'000'000 + r.uniform(200'000'000));
      v.add({seed.seed, u64_be(static_cast<uint64_t>(t))}, view(totp(seed, t)));
    }
  if (v.wants("keyseed"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      auto shared = random_point(r);
      Bytes n_i = r.bytes(32), n_r = r.bytes(32);
      v.add({point_bytes(shared), n_i, n_r}, compute_keyseed(shared, n_i, n_r));
    }
  if (v.wants("sks"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      auto keyseed = r.array<32>();
      Bytes n_i = r.bytes(32), n_r = r.bytes(32);
      auto ids = random_ids(r);
      auto ks = derive_sks(keyseed, n_i, n_r, ids);
      v.add({to_bytes(keyseed), n_i, n_r, ids.encode()},
            concat(ks.sk_ei.bytes(), ks.sk_ai.bytes(), ks.sk_er.bytes(), ks.sk_ar.bytes(), ks.sk_pi.bytes(),
                   ks.sk_pr.bytes()));
    }
  if (v.wants("auth_t1"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Role role = i % 2 ? Role::Responder : Role::Initiator;
      SessionNonces n{r.array<32>(), r.array<32>(), r.array<32>()};
      auto ke_r = random_point(r);
      Bytes signed_octets = r.bytes(16 + r.uniform(64));
      v.add({Bytes{static_cast<uint8_t>(role)}, to_bytes(n.n_b), to_bytes(n.n_i), to_bytes(n.n_r), point_bytes(ke_r),
             signed_octets},
            compute_auth_tier1(role, n, ke_r, signed_octets));
    }
  if (v.wants("signed_octets"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Bytes transcript = r.bytes(32 + r.uniform(64));
      std::optional<Bytes> id;
      if (i != 0) id = r.bytes(1 + r.uniform(20));
      SymmetricKey sk_p(r.bytes(32));
      Bytes peer_nonce = r.bytes(32);
      std::optional<ByteView> id_view;
      if (id) id_view = *id;
      v.add({transcript, id.value_or(Bytes{}), to_bytes(sk_p.bytes()), peer_nonce},
            build_signed_octets(transcript, id_view, sk_p, peer_nonce));
    }
  if (v.wants("kpwd"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Bytes spwd = r.bytes(32), n_i = r.bytes(32), n_r = r.bytes(32);
      auto ids = random_ids(r);
      v.add({spwd, n_i, n_r, ids.encode()}, derive_kpwd(spwd, n_i, n_r, ids).bytes());
    }
  if (v.wants("enonce"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      SymmetricKey kpwd(r.bytes(32));
      auto s = Scalar::random_nonzero(r);
      auto nonce = r.array<12>();
      v.add({to_bytes(kpwd.bytes()), to_bytes(s.to_bytes()), to_bytes(nonce)}, make_enonce(kpwd, s, nonce));
    }
  if (v.wants("ge"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      auto s = Scalar::random_nonzero(r);
      auto shared = random_point(r);
      v.add({to_bytes(s.to_bytes()), point_bytes(shared)}, point_bytes(compute_ge(s, shared)));
    }
  if (v.wants("auth_t2"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Bytes n_b = r.bytes(32), transcript = r.bytes(32 + r.uniform(64));
      SymmetricKey sk_p(r.bytes(32));
      v.add({n_b, transcript, to_bytes(sk_p.bytes())}, compute_auth_tier2(n_b, transcript, sk_p));
    }
  if (v.wants("auth_shared"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      auto lsk = Scalar::random_nonzero(r);
      auto lpk = random_point(r);
      v.add({to_bytes(lsk.to_bytes()), point_bytes(lpk)}, point_bytes(compute_auth_shared_secret(lsk, lpk)));
    }
  if (v.wants("gtk"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      auto ge = random_point(r);
      std::string tk = totp(TokenSeed{r.bytes(20)}, 1'700'000'000 + i * 30);
      v.add({point_bytes(ge), to_bytes(tk)}, compute_gtk(ge, tk));
    }
  if (v.wants("final_auth"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      Role role = i % 2 ? Role::Responder : Role::Initiator;
      Bytes signed_octets = r.bytes(16 + r.uniform(64));
      auto shared = random_point(r);
      auto gtk = r.array<32>();
      v.add({Bytes{static_cast<uint8_t>(role)}, signed_octets, point_bytes(shared), to_bytes(gtk)},
            compute_final_auth(role, signed_octets, shared, gtk));
    }
  if (v.wants("ltk"))
    for (int i = 0; i < kPerOp; ++i) {
      auto& r = v.rng();
      auto shared = random_point(r);
      Bytes n_i = r.bytes(32), n_r = r.bytes(32);
      auto ids = random_ids(r);
      auto created = at_seconds(1'700'000'000 + 3600.0 * i);
      auto ltk = compute_long_term_secret(shared, n_i, n_r, ids, created);
      v.add({point_bytes(shared), n_i, n_r, ids.encode(), u64_be(static_cast<uint64_t>(whole_seconds(created)))},
            ltk.key);
    }
}

int cmd_vectors(const Options& o, const std::optional<std::string>& filter, std::ostream& out, std::ostream& err) {
  VectorSink sink(o.seed.value_or(1), filter);
  generate_vectors(sink);
  if (sink.entries().empty()) {
    err << "no vectors for '" << filter.value_or("") << "'\n";
    return kFailure;
  }
  if (format_of(o, "hex") == "json")
    emit(o, out, sink.entries().dump(2) + "\n");
  else
    emit(o, out, sink.text());
  return kOk;
}

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::AlreadyRegistered:
      return kAlreadyRegistered;
    case ErrorCode::Io:
      return kIo;
    default:
      return kFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LOCATHE location-enhanced key exchange: demo, registry, attacks, test vectors", "locathe"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--registry", o.registry, "Registry file")->envname("LOCATHE_REGISTRY");
  app.add_option("--seed", o.seed, "Fix all randomness");
  app.add_option("--tier", o.tier, "1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}));
  app.add_option("--output,-o", o.output, "Output path, - for stdout");
  app.add_option("--format", o.format, "json or hex")->check(CLI::IsMember({"json", "hex"}));
  app.add_option("--at", o.at, "Protocol time in Unix seconds (default: system clock)");

  RegisterArgs reg_args;
  auto* reg = app.add_subcommand("register", "Register a user and write the bundle");
  reg->add_option("user_id", reg_args.user_id)->required();
  reg->add_option("--attrs", reg_args.attrs, "Comma-separated authority:name list");
  reg->add_option("--password", reg_args.password, "Derive UserKey from this password");
  reg->add_option("--relying-party", reg_args.relying_party);
  reg->add_option("--authority", reg_args.authorities, "Create or extend an authority: name=attr,attr");

  DemoArgs demo_args;
  auto* demo = app.add_subcommand("demo", "Run one handshake between a service endpoint and a user agent");
  demo->add_option("--user", demo_args.user, "Registered user to authenticate as");
  demo->add_option("--bundle", demo_args.bundle_path, "Bundle file for the user agent");
  demo->add_option("--policy", demo_args.policy, "Location access policy");
  demo->add_option("--attrs", demo_args.attrs, "Attributes of the built-in demo user");
  demo->add_flag("--wrong-password", demo_args.wrong_password, "Corrupt the agent's spwd");

  std::string scenario;
  std::optional<std::string> scenario_file;
  auto* attack = app.add_subcommand("attack", "Run an adversary scenario and compare with its expected verdict");
  attack->add_option("scenario", scenario, "Catalog scenario name");
  attack->add_option("--file", scenario_file, "Scenario JSON file");

  std::optional<std::string> filter;
  auto* vectors = app.add_subcommand("vectors", "Emit hex test vectors");
  vectors->add_option("op", filter, "Only this operation");

  auto* list = app.add_subcommand("registry-list", "List registered users (fingerprints only)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kFailure;
  }

  try {
    if (*reg) return cmd_register(o, reg_args, out);
    if (*demo) return cmd_demo(o, demo_args, out, err);
    if (*attack) {
      if (scenario.empty() && !scenario_file) {
        err << "attack needs a scenario name or --file\n";
        return kFailure;
      }
      return cmd_attack(o, scenario, scenario_file, out, err);
    }
    if (*vectors) return cmd_vectors(o, filter, out, err);
    if (*list) return cmd_registry_list(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (*demo && e.code() != ErrorCode::Io && e.code() != ErrorCode::Format) return kHandshakeFailed;
    return exit_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace locathe::cli
