#include "locathe/protocol.hpp"

#include <algorithm>

#include "locathe/error.hpp"

namespace locathe {
namespace {

constexpr std::size_t kNonceSize = 32;
constexpr std::size_t kEnonceSectionSize = 12 + kScalarSize;

Octets8 random_spi(RandomSource& rng, const Octets8& avoid) {
  for (;;) {
    auto spi = rng.array<8>();
    if (!is_all_zero(spi) && spi != avoid) return spi;
  }
}

template <std::size_t N>
std::array<uint8_t, N> exact(const Bytes& b) {
  if (b.size() != N) throw Error(ErrorCode::MalformedMessage, "section length");
  std::array<uint8_t, N> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

Point peer_point(const Bytes& b) {
  Point p = Point::decode(b);
  if (p.is_identity()) throw Error(ErrorCode::MalformedMessage, "identity point");
  return p;
}

ErrorClass class_of(uint8_t v) {
  if (v < 1 || v > 3) throw Error(ErrorCode::MalformedMessage, "error class");
  return static_cast<ErrorClass>(v);
}

}  // namespace

std::string_view to_string(TierMode t) {
  switch (t) {
    case TierMode::Tier1: return "1";
    case TierMode::Tier2: return "2";
    case TierMode::Both: return "both";
  }
  return "?";
}

TierMode parse_tier(std::string_view text) {
  if (text == "1") return TierMode::Tier1;
  if (text == "2") return TierMode::Tier2;
  if (text == "both") return TierMode::Both;
  throw Error(ErrorCode::Format, "tier must be 1, 2 or both");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::AwaitBroadcast: return "AWAIT_BROADCAST";
    case Phase::AwaitKe: return "AWAIT_KE";
    case Phase::AwaitT1: return "AWAIT_T1";
    case Phase::AwaitT2: return "AWAIT_T2";
    case Phase::AwaitT2Resp: return "AWAIT_T2_RESP";
    case Phase::AwaitFinal: return "AWAIT_FINAL";
    case Phase::Established: return "ESTABLISHED";
    case Phase::Failed: return "FAILED";
  }
  return "?";
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Ignore: return "ignore";
    case Disposition::Process: return "process";
    case Disposition::Reject: return "reject";
    case Disposition::Error: return "error";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Broadcast stage

Bytes ServiceIdentity::certificate() const {
  Bytes out;
  append_prefixed16(out, view(service_id));
  append(out, key.bytes());
  return out;
}

ServiceIdentity ServiceIdentity::from_certificate(ByteView cert) {
  try {
    Reader r(cert);
    auto id = r.prefixed16();
    auto key = r.take(32);
    r.expect_done();
    return {std::string(id.begin(), id.end()), VerifyKey::from_bytes(key)};
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedMessage, std::string("certificate: ") + e.what());
  }
}

void BeaconConfig::validate() const {
  if (broadcast_interval <= Duration::zero()) throw Error(ErrorCode::InvalidKey, "broadcast interval must be positive");
  if (nb_validity < broadcast_interval) throw Error(ErrorCode::InvalidKey, "validity shorter than broadcast interval");
}

BeaconTick beacon_tick(const BeaconConfig& cfg, const SigningKey& service_key, const ServiceIdentity& identity,
                       const AbePublicParams& params, Timestamp now, RandomSource& rng) {
  Block32 n_b{};
  auto random = rng.array<24>();
  std::copy(random.begin(), random.end(), n_b.begin());
  std::copy(cfg.beacon_id.begin(), cfg.beacon_id.end(), n_b.begin() + 24);
  auto handle = rng.array<8>();
  BroadcastRecord rec{n_b, handle, default_abe_scheme().encrypt(params, cfg.access_policy, n_b, rng), {}, {}, now,
                      now + cfg.nb_validity, {}};
  rec.bnonce_octets = rec.bnonce.encode();
  rec.signature = sign(service_key, rec.bnonce_octets);
  rec.fetch_response = ProtocolMessage{MsgType::BnonceFetchResp,
                                       {},
                                       0,
                                       {to_bytes(rec.handle), rec.bnonce_octets, to_bytes(rec.signature),
                                        identity.certificate()}}
                           .encode();
  return {Advert{cfg.beacon_id, rec.handle}, std::move(rec)};
}

bool nb_window_check(const BroadcastRecord& record, Timestamp now) {
  return record.issued_at <= now && now < record.expires_at;
}

ProtocolMessage make_fetch_request(const Octets8& handle) {
  return {MsgType::BnonceFetchReq, {}, 0, {to_bytes(handle)}};
}

ProtocolMessage fetch_bnonce(const BroadcastRecord& record, const ProtocolMessage& req, Timestamp now) {
  if (req.type != MsgType::BnonceFetchReq || req.sections.size() != 1 ||
      !constant_time_equal(req.sections[0], record.handle))
    throw Error(ErrorCode::UnknownHandle, "fetch handle does not name this broadcast");
  if (!nb_window_check(record, now)) throw Error(ErrorCode::UnknownHandle, "broadcast expired");
  return ProtocolMessage::decode(record.fetch_response);
}

// ---------------------------------------------------------------------------
// Session

Session::Session(Role role, TierMode tier, SessionOptions options)
    : role_(role), tier_(tier), options_(std::move(options)) {}

bool Session::holds_ephemeral_secrets() const { return ephemeral_ || s_ || lsk_; }

bool Session::expire(Timestamp now) {
  if (is_terminal(phase_) || now < deadline_) return false;
  fail(ErrorCode::Timeout);
  return true;
}

void Session::observe(std::string_view label, ByteView value) const {
  if (options_.observer) options_.observer(label, value);
}

void Session::fail(ErrorCode code) {
  failed_in_ = phase_;
  phase_ = Phase::Failed;
  failure_ = code;
  wipe_ephemerals();
}

void Session::advance(Phase next, Timestamp now) {
  phase_ = next;
  deadline_ = now + options_.timeout;
  if (is_terminal(next)) wipe_ephemerals();
}

void Session::wipe_ephemerals() {
  for (auto* s : {&ephemeral_, &s_, &lsk_}) {
    if (*s) (*s)->wipe();
    s->reset();
  }
}

Outgoing Session::send(ProtocolMessage msg, Duration delay) {
  Bytes wire = msg.encode();
  if (msg.type != MsgType::Error) append(sent_, wire);
  return {std::move(wire), delay};
}

Outgoing Session::send_sealed(MsgType type, const std::vector<Bytes>& inner) {
  return send(seal(type, ids_, next_counter_++, inner, *ks_, role_));
}

Outgoing Session::error_reply(ErrorClass cls, Duration delay) {
  std::vector<Bytes> body{Bytes{static_cast<uint8_t>(cls)}};
  if (ks_) return send(seal(MsgType::Error, ids_, next_counter_++, body, *ks_, role_), delay);
  return send(ProtocolMessage{MsgType::Error, ids_, next_counter_++, body}, delay);
}

std::optional<Disposition> Session::screen(const ProtocolMessage& msg, MsgType expected) const {
  if (is_terminal(phase_)) return Disposition::Ignore;
  if (msg.counter <= peer_hwm_) return Disposition::Ignore;
  if (msg.type != expected && msg.type != MsgType::Error) return Disposition::Ignore;
  return std::nullopt;
}

void Session::derive_keys(const Point& shared) {
  shared_ = shared;
  auto seed = compute_keyseed(shared, nonces_.n_i, nonces_.n_r);
  ks_ = derive_sks(seed, nonces_.n_i, nonces_.n_r, ids_);
  observe("shared", shared.encode());
  observe("keyseed", seed);
  observe("sk_ei", ks_->sk_ei.bytes());
  observe("sk_ai", ks_->sk_ai.bytes());
  observe("sk_er", ks_->sk_er.bytes());
  observe("sk_ar", ks_->sk_ar.bytes());
  observe("sk_pi", ks_->sk_pi.bytes());
  observe("sk_pr", ks_->sk_pr.bytes());
}

// ---------------------------------------------------------------------------
// Initiator

InitiatorSession::InitiatorSession(RegistrationBundle bundle, InitiatorOptions options, RandomSource& rng)
    : Session(Role::Initiator, options.tier, options.session),
      bundle_(std::move(bundle)),
      init_options_(std::move(options)),
      rng_(rng),
      service_{bundle_.service_id, bundle_.service_key} {}

InitiatorSession::Start InitiatorSession::start(const RegistrationBundle& bundle, ByteView fetch_response,
                                                InitiatorOptions options, Timestamp now, RandomSource& rng) {
  auto resp = ProtocolMessage::decode(fetch_response);
  if (resp.type != MsgType::BnonceFetchResp || resp.sections.size() < 3 || resp.sections.size() > 4)
    throw Error(ErrorCode::MalformedMessage, "not a BNONCE fetch response");
  auto handle = exact<8>(resp.sections[0]);
  const Bytes& bnonce = resp.sections[1];
  bool signed_ok = false;
  try {
    signed_ok = verify(bundle.service_key, bnonce, resp.sections[2]);
  } catch (const Error&) {
  }
  if (!signed_ok) throw Error(ErrorCode::BadSignature, "BNONCE signature does not verify");
  if (resp.sections.size() == 4) {
    auto cert = ServiceIdentity::from_certificate(resp.sections[3]);
    if (!(cert.key == bundle.service_key) || cert.service_id != bundle.service_id)
      throw Error(ErrorCode::BadSignature, "certificate does not match the registered service");
  }
  Bytes n_b = default_abe_scheme().decrypt(bundle.abe_keys, AbeCiphertext::decode(bnonce), now);
  if (n_b.size() != kNonceSize) throw Error(ErrorCode::MalformedMessage, "broadcast nonce length");

  std::unique_ptr<InitiatorSession> s(new InitiatorSession(bundle, std::move(options), rng));
  s->handle_ = handle;
  s->nonces_.n_b = exact<32>(n_b);
  s->nonces_.n_i = rng.array<32>();
  s->ids_.spi_i = random_spi(rng, {});
  auto kp = ecdhe_keypair(rng);
  s->ephemeral_ = kp.secret;
  s->ke_i_ = kp.public_point;
  s->observe("n_b", s->nonces_.n_b);
  s->observe("ephemeral", kp.secret.to_bytes());
  s->received_ = to_bytes(fetch_response);

  std::vector<Bytes> sections{Bytes{static_cast<uint8_t>(s->tier_)}, to_bytes(s->nonces_.n_i),
                              to_bytes(s->ke_i_.encode()), to_bytes(handle)};
  auto out = s->send(ProtocolMessage{MsgType::KeReq, s->ids_, s->next_counter_++, std::move(sections)});
  s->advance(Phase::AwaitKe, now);
  return {std::move(s), std::move(out.wire)};
}

std::optional<ByteView> InitiatorSession::identity() const {
  if (tier_ == TierMode::Tier1) return std::nullopt;
  return view(bundle_.user_id);
}

HandleResult InitiatorSession::abort(ErrorCode code, ErrorClass cls) {
  HandleResult r{Disposition::Error, {error_reply(cls)}};
  fail(code);
  return r;
}

HandleResult InitiatorSession::handle(ByteView wire, Timestamp now) {
  ProtocolMessage msg;
  try {
    msg = ProtocolMessage::decode(wire);
  } catch (const Error&) {
    return {Disposition::Reject, {}};
  }
  if (msg.ids.spi_i != ids_.spi_i) return {Disposition::Reject, {}};
  bool spi_r_known = !is_all_zero(ids_.spi_r);
  if (spi_r_known && msg.ids.spi_r != ids_.spi_r) return {Disposition::Reject, {}};

  MsgType expected = MsgType::Error;
  switch (phase_) {
    case Phase::AwaitKe: expected = MsgType::KeResp; break;
    case Phase::AwaitT1: expected = MsgType::T1AuthResp; break;
    case Phase::AwaitT2Resp: expected = MsgType::T2Msg2; break;
    case Phase::AwaitFinal: expected = MsgType::FinalAuthResp; break;
    default: break;
  }
  if (auto d = screen(msg, expected)) return {*d, {}};
  if (msg.type == MsgType::Error) return on_error(msg);

  switch (msg.type) {
    case MsgType::KeResp: return on_ke_resp(msg, now);
    case MsgType::T1AuthResp: return on_t1_resp(msg, now);
    case MsgType::T2Msg2: return on_t2_resp(msg, now);
    case MsgType::FinalAuthResp: return on_final_resp(msg, now);
    default: return {Disposition::Ignore, {}};
  }
}

HandleResult InitiatorSession::on_error(const ProtocolMessage& msg) {
  try {
    auto body = ks_ ? open(msg, *ks_, Role::Responder) : msg.sections;
    if (body.size() != 1 || body[0].size() != 1) return {Disposition::Reject, {}};
    class_of(body[0][0]);
  } catch (const Error&) {
    return {Disposition::Ignore, {}};
  }
  peer_hwm_ = msg.counter;
  fail(ErrorCode::PeerError);
  return {Disposition::Error, {}};
}

HandleResult InitiatorSession::on_ke_resp(const ProtocolMessage& msg, Timestamp now) {
  if (is_all_zero(msg.ids.spi_r) || msg.ids.spi_r == ids_.spi_i || msg.sections.size() != 2)
    return {Disposition::Reject, {}};
  Block32 n_r;
  Point ke_r;
  try {
    n_r = exact<32>(msg.sections[0]);
    ke_r = peer_point(msg.sections[1]);
  } catch (const Error&) {
    return {Disposition::Reject, {}};
  }
  ids_.spi_r = msg.ids.spi_r;
  peer_hwm_ = msg.counter;
  nonces_.n_r = n_r;
  ke_r_ = ke_r;
  derive_keys(dh(*ephemeral_, ke_r_));
  append(received_, msg.encode());

  if (!uses_tier1(tier_)) {
    auto out = make_t2_msg1();
    if (phase_ == Phase::Failed) return {Disposition::Error, {out}};
    advance(Phase::AwaitT2Resp, now);
    return {Disposition::Process, {out}};
  }
  auto so = build_signed_octets(sent_, std::nullopt, ks_->sk_pi, nonces_.n_r);
  auto auth = compute_auth_tier1(Role::Initiator, nonces_, ke_r_, so);
  auto out = send_sealed(MsgType::T1AuthReq, {to_bytes(auth), init_options_.optional_request});
  advance(Phase::AwaitT1, now);
  return {Disposition::Process, {out}};
}

HandleResult InitiatorSession::on_t1_resp(const ProtocolMessage& msg, Timestamp now) {
  std::vector<Bytes> body;
  try {
    body = open(msg, *ks_, Role::Responder);
  } catch (const Error&) {
    return abort(ErrorCode::DecryptFailed, ErrorClass::Protocol);
  }
  peer_hwm_ = msg.counter;
  try {
    if (body.size() != 4) throw Error(ErrorCode::MalformedMessage, "T1_AUTH_RESP sections");
    auto auth_r = exact<32>(body[0]);
    auto cert = ServiceIdentity::from_certificate(body[3]);
    if (!(cert.key == service_.key) || cert.service_id != service_.service_id || view(service_.service_id).size() != body[2].size() ||
        !constant_time_equal(body[2], view(service_.service_id)))
      return abort(ErrorCode::BadSignature, ErrorClass::Auth);
    bool sig_ok = verify(service_.key, auth_r, body[1]);
    auto so = build_signed_octets(received_, ByteView(body[2]), ks_->sk_pr, nonces_.n_i);
    auto expected = compute_auth_tier1(Role::Responder, nonces_, ke_r_, so);
    if (!sig_ok) return abort(ErrorCode::BadSignature, ErrorClass::Auth);
    if (!constant_time_equal(expected, auth_r)) return abort(ErrorCode::AuthMismatch, ErrorClass::Auth);
  } catch (const Error&) {
    return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  }
  append(received_, msg.encode());

  if (uses_tier2(tier_)) {
    auto out = make_t2_msg1();
    if (phase_ == Phase::Failed) return {Disposition::Error, {out}};
    advance(Phase::AwaitT2Resp, now);
    return {Disposition::Process, {out}};
  }
  auto out = make_final_req(now);
  advance(Phase::AwaitFinal, now);
  return {Disposition::Process, {out}};
}

Outgoing InitiatorSession::make_t2_msg1() {
  auto kpwd = derive_kpwd(bundle_.spwd, nonces_.n_i, nonces_.n_r, ids_);
  s_ = Scalar::random_nonzero(rng_);
  Nonce12 iv = rng_.array<12>();
  observe("kpwd", kpwd.bytes());
  observe("s", s_->to_bytes());
  try {
    ge_ = compute_ge(*s_, *shared_);
  } catch (const Error& e) {
    auto out = error_reply(ErrorClass::Internal);
    fail(e.code());
    return out;
  }
  auto pair = tier2_keypair(*ge_, rng_);
  lsk_ = pair.lsk;
  lpk_ = pair.lpk;
  observe("lsk", lsk_->to_bytes());
  auto auth = compute_auth_tier2(nonces_.n_b, concat(sent_, received_), ks_->sk_pi);
  return send_sealed(MsgType::T2Msg1, {concat(iv, make_enonce(kpwd, *s_, iv)), to_bytes(bundle_.user_id),
                                       to_bytes(auth), to_bytes(lpk_->encode())});
}

HandleResult InitiatorSession::on_t2_resp(const ProtocolMessage& msg, Timestamp now) {
  std::vector<Bytes> body;
  try {
    body = open(msg, *ks_, Role::Responder);
  } catch (const Error&) {
    return abort(ErrorCode::DecryptFailed, ErrorClass::Protocol);
  }
  peer_hwm_ = msg.counter;
  try {
    if (body.size() != 4) throw Error(ErrorCode::MalformedMessage, "T2_MSG2 sections");
    auto cert = ServiceIdentity::from_certificate(body[1]);
    if (!(cert.key == service_.key) || body[0] != to_bytes(service_.service_id))
      return abort(ErrorCode::BadSignature, ErrorClass::Auth);
    Point lpk_r = peer_point(body[2]);
    if (body[3] != to_bytes(kTokenFactor)) return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
    auth_shared_ = compute_auth_shared_secret(*lsk_, lpk_r);
  } catch (const Error&) {
    return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  }
  auto tk = totp(bundle_.token_seed, whole_seconds(now + init_options_.clock_skew));
  observe("tk", view(tk));
  gtk_ = compute_gtk(*ge_, tk);
  append(received_, msg.encode());
  auto out = make_final_req(now);
  advance(Phase::AwaitFinal, now);
  return {Disposition::Process, {out}};
}

Outgoing InitiatorSession::make_final_req(Timestamp) {
  if (!uses_tier2(tier_)) {
    auth_shared_ = shared_;
    gtk_ = compute_gtk(*shared_, "");
  }
  auto so = build_signed_octets(sent_, identity(), ks_->sk_pi, nonces_.n_r);
  auto auth = compute_final_auth(Role::Initiator, so, *auth_shared_, *gtk_);
  return send_sealed(MsgType::FinalAuthReq, {to_bytes(auth)});
}

HandleResult InitiatorSession::on_final_resp(const ProtocolMessage& msg, Timestamp now) {
  std::vector<Bytes> body;
  try {
    body = open(msg, *ks_, Role::Responder);
  } catch (const Error&) {
    return abort(ErrorCode::DecryptFailed, ErrorClass::Protocol);
  }
  peer_hwm_ = msg.counter;
  if (body.size() != 1) return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  auto so = build_signed_octets(received_, view(service_.service_id), ks_->sk_pr, nonces_.n_i);
  auto expected = compute_final_auth(Role::Responder, so, *auth_shared_, *gtk_);
  if (!constant_time_equal(expected, body[0])) return abort(ErrorCode::FinalAuthFailed, ErrorClass::Auth);
  append(received_, msg.encode());
  ltk_ = compute_long_term_secret(*auth_shared_, nonces_.n_i, nonces_.n_r, ids_, now);
  observe("ltk", ltk_->key);
  advance(Phase::Established, now);
  return {Disposition::Process, {}};
}

// ---------------------------------------------------------------------------
// Responder

ResponderSession::ResponderSession(const ServiceEndpoint& endpoint, BroadcastRecord record, TierMode tier,
                                   SessionOptions options)
    : Session(Role::Responder, tier, std::move(options)), endpoint_(endpoint), record_(std::move(record)) {}

HandleResult ResponderSession::abort(ErrorCode code, ErrorClass cls) {
  Duration delay = cls == ErrorClass::Auth ? endpoint_.config_.auth_error_delay : Duration::zero();
  HandleResult r{Disposition::Error, {error_reply(cls, delay)}};
  fail(code);
  return r;
}

HandleResult ResponderSession::on_ke_req(const ProtocolMessage& msg, Timestamp now, RandomSource& rng) {
  ids_.spi_i = msg.ids.spi_i;
  ids_.spi_r = random_spi(rng, ids_.spi_i);
  peer_hwm_ = msg.counter;
  nonces_.n_b = record_.n_b;
  nonces_.n_i = exact<32>(msg.sections[1]);
  ke_i_ = peer_point(msg.sections[2]);
  nonces_.n_r = rng.array<32>();
  auto kp = ecdhe_keypair(rng);
  ephemeral_ = kp.secret;
  ke_r_ = kp.public_point;
  observe("n_b", nonces_.n_b);
  observe("ephemeral", kp.secret.to_bytes());
  sent_ = record_.fetch_response;
  received_ = msg.encode();
  derive_keys(dh(*ephemeral_, ke_i_));
  auto out = send(ProtocolMessage{MsgType::KeResp, ids_, next_counter_++,
                                  {to_bytes(nonces_.n_r), to_bytes(ke_r_.encode())}});
  advance(uses_tier1(tier_) ? Phase::AwaitT1 : Phase::AwaitT2, now);
  return {Disposition::Process, {out}};
}

HandleResult ResponderSession::handle(const ProtocolMessage& msg, Timestamp now, RandomSource& rng) {
  MsgType expected = MsgType::Error;
  switch (phase_) {
    case Phase::AwaitT1: expected = MsgType::T1AuthReq; break;
    case Phase::AwaitT2: expected = MsgType::T2Msg1; break;
    case Phase::AwaitFinal: expected = MsgType::FinalAuthReq; break;
    default: break;
  }
  if (auto d = screen(msg, expected)) return {*d, {}};
  if (msg.type == MsgType::Error) {
    try {
      auto body = open(msg, *ks_, Role::Initiator);
      if (body.size() != 1 || body[0].size() != 1) return {Disposition::Reject, {}};
      class_of(body[0][0]);
    } catch (const Error&) {
      return {Disposition::Ignore, {}};
    }
    peer_hwm_ = msg.counter;
    fail(ErrorCode::PeerError);
    return {Disposition::Error, {}};
  }
  switch (msg.type) {
    case MsgType::T1AuthReq: return on_t1_req(msg, now);
    case MsgType::T2Msg1: return on_t2_msg1(msg, now, rng);
    case MsgType::FinalAuthReq: return on_final_req(msg, now);
    default: return {Disposition::Ignore, {}};
  }
}

HandleResult ResponderSession::on_t1_req(const ProtocolMessage& msg, Timestamp now) {
  std::vector<Bytes> body;
  try {
    body = open(msg, *ks_, Role::Initiator);
  } catch (const Error&) {
    return abort(ErrorCode::DecryptFailed, ErrorClass::Protocol);
  }
  peer_hwm_ = msg.counter;
  if (body.size() != 2 || body[0].size() != 32) return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  if (!nb_window_check(record_, now)) return abort(ErrorCode::AuthMismatch, ErrorClass::Auth);
  auto so = build_signed_octets(received_, std::nullopt, ks_->sk_pi, nonces_.n_r);
  auto expected = compute_auth_tier1(Role::Initiator, nonces_, ke_r_, so);
  if (!constant_time_equal(expected, body[0])) return abort(ErrorCode::AuthMismatch, ErrorClass::Auth);
  append(received_, msg.encode());

  const auto& id = endpoint_.identity_;
  auto so_r = build_signed_octets(sent_, view(id.service_id), ks_->sk_pr, nonces_.n_i);
  auto auth_r = compute_auth_tier1(Role::Responder, nonces_, ke_r_, so_r);
  auto sig = sign(endpoint_.registry_.signing_key(), auth_r);
  auto out = send_sealed(MsgType::T1AuthResp,
                         {to_bytes(auth_r), to_bytes(sig), to_bytes(id.service_id), id.certificate()});
  advance(uses_tier2(tier_) ? Phase::AwaitT2 : Phase::AwaitFinal, now);
  return {Disposition::Process, {out}};
}

HandleResult ResponderSession::on_t2_msg1(const ProtocolMessage& msg, Timestamp now, RandomSource& rng) {
  std::vector<Bytes> body;
  try {
    body = open(msg, *ks_, Role::Initiator);
  } catch (const Error&) {
    return abort(ErrorCode::DecryptFailed, ErrorClass::Protocol);
  }
  peer_hwm_ = msg.counter;
  if (body.size() != 4 || body[0].size() != kEnonceSectionSize || body[2].size() != 32)
    return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  Point lpk_i;
  try {
    lpk_i = peer_point(body[3]);
  } catch (const Error&) {
    return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  }
  if (!nb_window_check(record_, now)) return abort(ErrorCode::AuthMismatch, ErrorClass::Auth);
  auto expected = compute_auth_tier2(nonces_.n_b, concat(received_, sent_), ks_->sk_pi);
  if (!constant_time_equal(expected, body[2])) return abort(ErrorCode::AuthTier2Mismatch, ErrorClass::Auth);

  std::string user_id(body[1].begin(), body[1].end());
  UserRecord user;
  try {
    user = endpoint_.registry_.lookup_user(user_id, now);
  } catch (const Error& e) {
    // UnknownUser and Expired leave identically: auth class, fixed delay.
    return abort(e.code(), ErrorClass::Auth);
  }
  auto kpwd = derive_kpwd(user.spwd, nonces_.n_i, nonces_.n_r, ids_);
  Nonce12 iv{};
  std::copy(body[0].begin(), body[0].begin() + 12, iv.begin());
  s_ = open_enonce(kpwd, iv, ByteView(body[0]).subspan(12));
  observe("kpwd", kpwd.bytes());
  observe("s", s_->to_bytes());
  try {
    ge_ = compute_ge(*s_, *shared_);
  } catch (const Error& e) {
    return abort(e.code(), ErrorClass::Internal);
  }
  auto pair = tier2_keypair(*ge_, rng);
  lsk_ = pair.lsk;
  lpk_ = pair.lpk;
  observe("lsk", lsk_->to_bytes());
  auth_shared_ = compute_auth_shared_secret(*lsk_, lpk_i);
  user_id_ = user_id;
  token_ = user.token_seed;
  append(received_, msg.encode());

  const auto& id = endpoint_.identity_;
  auto out = send_sealed(MsgType::T2Msg2, {to_bytes(id.service_id), id.certificate(), to_bytes(lpk_->encode()),
                                           to_bytes(kTokenFactor)});
  advance(Phase::AwaitFinal, now);
  return {Disposition::Process, {out}};
}

HandleResult ResponderSession::on_final_req(const ProtocolMessage& msg, Timestamp now) {
  std::vector<Bytes> body;
  try {
    body = open(msg, *ks_, Role::Initiator);
  } catch (const Error&) {
    return abort(ErrorCode::DecryptFailed, ErrorClass::Protocol);
  }
  peer_hwm_ = msg.counter;
  if (body.size() != 1) return abort(ErrorCode::MalformedMessage, ErrorClass::Protocol);
  std::optional<ByteView> peer_id;
  if (uses_tier2(tier_)) {
    auto tk = totp(*token_, whole_seconds(now));
    observe("tk", view(tk));
    gtk_ = compute_gtk(*ge_, tk);
    peer_id = view(*user_id_);
  } else {
    auth_shared_ = shared_;
    gtk_ = compute_gtk(*shared_, "");
  }
  auto so = build_signed_octets(received_, peer_id, ks_->sk_pi, nonces_.n_r);
  auto expected = compute_final_auth(Role::Initiator, so, *auth_shared_, *gtk_);
  if (!constant_time_equal(expected, body[0])) return abort(ErrorCode::FinalAuthFailed, ErrorClass::Auth);
  append(received_, msg.encode());

  const auto& id = endpoint_.identity_;
  auto so_r = build_signed_octets(sent_, view(id.service_id), ks_->sk_pr, nonces_.n_i);
  auto auth_r = compute_final_auth(Role::Responder, so_r, *auth_shared_, *gtk_);
  ltk_ = compute_long_term_secret(*auth_shared_, nonces_.n_i, nonces_.n_r, ids_, now);
  observe("ltk", ltk_->key);
  auto out = send_sealed(MsgType::FinalAuthResp, {to_bytes(auth_r)});
  advance(Phase::Established, now);
  return {Disposition::Process, {out}};
}

// ---------------------------------------------------------------------------
// Service endpoint

ServiceEndpoint::ServiceEndpoint(const ServiceRegistry& registry, EndpointConfig config, RandomSource& rng)
    : registry_(registry),
      config_(std::move(config)),
      rng_(rng),
      identity_{registry.config().service_id, registry.signing_key().verify_key()} {
  config_.beacon.validate();
}

Bytes ServiceEndpoint::beacon_tick(Timestamp now) {
  prune(now);
  auto tick = locathe::beacon_tick(config_.beacon, registry_.signing_key(), identity_, registry_.abe_public_params(),
                                   now, rng_);
  records_.push_back(std::move(tick.record));
  if (config_.max_records > 0)
    while (records_.size() > config_.max_records) records_.pop_front();
  return tick.advert.encode();
}

void ServiceEndpoint::prune(Timestamp now) {
  while (!records_.empty() && !(now < records_.front().expires_at)) records_.pop_front();
}

const BroadcastRecord* ServiceEndpoint::find_record(const Octets8& handle, Timestamp now) const {
  for (const auto& r : records_)
    if (r.handle == handle && nb_window_check(r, now)) return &r;
  return nullptr;
}

void ServiceEndpoint::expire(Timestamp now) {
  prune(now);
  for (auto& [key, s] : sessions_) s->expire(now);
}

std::vector<const ResponderSession*> ServiceEndpoint::sessions() const {
  std::vector<const ResponderSession*> out;
  for (const auto& [key, s] : sessions_) out.push_back(s.get());
  return out;
}

HandleResult ServiceEndpoint::handle(ByteView wire, Timestamp now) {
  auto type = peek_type(wire);
  if (type == MsgType::Advert) return {Disposition::Ignore, {}};
  ProtocolMessage msg;
  try {
    msg = ProtocolMessage::decode(wire);
  } catch (const Error&) {
    return {Disposition::Reject, {}};
  }

  if (msg.type == MsgType::BnonceFetchReq) {
    if (msg.sections.size() != 1 || msg.sections[0].size() != 8) return {Disposition::Reject, {}};
    const BroadcastRecord* rec = find_record(exact<8>(msg.sections[0]), now);
    if (!rec) {
      ProtocolMessage err{MsgType::Error, {}, 0, {Bytes{static_cast<uint8_t>(ErrorClass::Protocol)}}};
      return {Disposition::Error, {{err.encode(), {}}}};
    }
    return {Disposition::Process, {{fetch_bnonce(*rec, msg, now).encode(), {}}}};
  }

  if (msg.type == MsgType::KeReq && is_all_zero(msg.ids.spi_r)) {
    if (is_all_zero(msg.ids.spi_i)) return {Disposition::Reject, {}};
    if (by_initiator_spi_.count(msg.ids.spi_i)) return {Disposition::Ignore, {}};
    if (msg.sections.size() != 4 || msg.sections[0].size() != 1 || msg.sections[1].size() != 32 ||
        msg.sections[3].size() != 8)
      return {Disposition::Reject, {}};
    uint8_t tier = msg.sections[0][0];
    if (tier < 1 || tier > 3) return {Disposition::Reject, {}};
    try {
      peer_point(msg.sections[2]);
    } catch (const Error&) {
      return {Disposition::Reject, {}};
    }
    prune(now);
    const BroadcastRecord* rec = find_record(exact<8>(msg.sections[3]), now);
    if (!rec && !records_.empty()) rec = &records_.back();
    if (!rec) {
      ProtocolMessage err{MsgType::Error, msg.ids, 0, {Bytes{static_cast<uint8_t>(ErrorClass::Protocol)}}};
      return {Disposition::Error, {{err.encode(), {}}}};
    }
    std::unique_ptr<ResponderSession> s(
        new ResponderSession(*this, *rec, static_cast<TierMode>(tier), config_.session));
    auto result = s->on_ke_req(msg, now, rng_);
    auto key = std::pair{s->ids().spi_i, s->ids().spi_r};
    by_initiator_spi_.emplace(key.first, key);
    sessions_.emplace(key, std::move(s));
    return result;
  }

  auto it = sessions_.find({msg.ids.spi_i, msg.ids.spi_r});
  if (it == sessions_.end()) return {Disposition::Reject, {}};
  return it->second->handle(msg, now, rng_);
}

}  // namespace locathe
