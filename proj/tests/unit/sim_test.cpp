#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "locathe/error.hpp"
#include "locathe/sim.hpp"

using namespace locathe;
using namespace locathe::sim;

namespace {

const SessionOutcome* find_session(const ScenarioOutcome& o, const std::string& node) {
  for (const auto& s : o.sessions)
    if (s.node == node) return &s;
  return nullptr;
}

bool adversary_saw(const World& w, ByteView needle) {
  for (const auto* f : w.adversary_view())
    if (contains_subsequence(f->bytes, needle)) return true;
  return false;
}

CompromisedSecrets compromise(const World& w, const std::string& user) {
  auto rec = w.registry().lookup_user(user, at_seconds(1'700'000'000));
  return {rec.user_key, rec.spwd, rec.token_seed, rec.abe_keys, w.registry().signing_key().seed()};
}

}  // namespace

TEST_CASE("virtual clock orders events", "[sim]") {
  VirtualClock clock;
  std::vector<int> order;
  clock.schedule(at_seconds(2), [&] { order.push_back(2); });
  clock.schedule(at_seconds(1), [&] { order.push_back(1); }, true);
  clock.schedule(at_seconds(2), [&] { order.push_back(3); });
  CHECK(clock.pending_foreground() == 2);
  while (clock.step()) {
  }
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(clock.now() == at_seconds(2));
  // Scheduling in the past runs at the current time.
  clock.schedule(at_seconds(0), [&] { order.push_back(4); });
  clock.step();
  CHECK(clock.now() == at_seconds(2));
}

TEST_CASE("eavesdrop baseline for every tier", "[sim]") {
  for (auto tier : {TierMode::Tier1, TierMode::Tier2, TierMode::Both}) {
    World w(eavesdrop_spec(5, tier));
    auto o = w.run();
    CHECK(o.agents.at(0).phase == Phase::Established);
    CHECK(o.established(Role::Responder) == 1);
    CHECK_FALSE(o.flags.any());
    CHECK(judge("eavesdrop", o).matches);
    // Public values are visible, the user identity never is.
    const auto* bob = find_session(o, "service-l");
    REQUIRE(bob);
    CHECK_FALSE(adversary_saw(w, view("alice@example.org")));
    for (const auto& f : w.frames())
      if (peek_type(f.bytes) == MsgType::KeReq)
        CHECK(adversary_saw(w, ProtocolMessage::decode(f.bytes).sections[2]));
  }
}

TEST_CASE("same seed, same run", "[sim]") {
  for (const auto& name : catalog_names()) {
    auto a = run_scenario(*catalog_spec(name, 11));
    auto b = run_scenario(*catalog_spec(name, 11));
    CHECK(a.log == b.log);
    CHECK(a.to_json() == b.to_json());
  }
  auto c = run_scenario(*catalog_spec("eavesdrop", 12));
  CHECK(c.to_json() != run_scenario(*catalog_spec("eavesdrop", 11)).to_json());
}

TEST_CASE("dropping KE_RESP ends in a timeout", "[sim]") {
  auto spec = eavesdrop_spec(6);
  spec.adversary.rules.push_back({MatchSpec{"KE_RESP", "", std::nullopt, std::nullopt}, {ActionSpec{ActionKind::Drop}}});
  auto o = run_scenario(spec);
  const auto* alice = find_session(o, "alice");
  REQUIRE(alice);
  CHECK(alice->phase == Phase::Failed);
  CHECK(alice->failure == ErrorCode::Timeout);
  CHECK(alice->failed_in == Phase::AwaitKe);
  CHECK(find_session(o, "service-l")->failure == ErrorCode::Timeout);
  CHECK_FALSE(o.flags.any());
}

TEST_CASE("mitm substitution fails at an auth step", "[sim]") {
  for (auto tier : {TierMode::Tier1, TierMode::Tier2, TierMode::Both}) {
    auto o = run_scenario(mitm_spec(7, MitmVariant::SubstituteKe, tier));
    const auto* bob = find_session(o, "service-l");
    REQUIRE(bob);
    CHECK(bob->phase == Phase::Failed);
    CHECK(bob->failure == (uses_tier1(tier) ? ErrorCode::AuthMismatch : ErrorCode::AuthTier2Mismatch));
    CHECK(find_session(o, "alice")->phase == Phase::Failed);
    CHECK_FALSE(o.flags.any());
  }
}

TEST_CASE("bnonce tampering stops the initiator before key exchange", "[sim]") {
  World w(mitm_spec(8, MitmVariant::TamperBnonce));
  auto o = w.run();
  CHECK(o.agents.at(0).last_error == ErrorCode::BadSignature);
  CHECK(o.sessions.empty());
  for (const auto& f : w.frames()) CHECK(peek_type(f.bytes) != MsgType::KeReq);
  CHECK(judge("mitm", o).matches == false);
}

TEST_CASE("replay outside the window fails at the responder", "[sim]") {
  auto o = scenario_replay(9, ReplayCase::A, std::chrono::seconds(1));
  const auto* bob = find_session(o, "service-l");
  REQUIRE(bob);
  CHECK(bob->failure == ErrorCode::AuthMismatch);
  CHECK(o.established(Role::Initiator) == 0);
  CHECK_FALSE(o.flags.any());
  CHECK(judge("replay-a", o).matches);
}

TEST_CASE("replay inside the window", "[sim]") {
  auto o = scenario_replay(10, ReplayCase::B);
  CHECK(o.agents.at(0).phase == Phase::Established);
  CHECK(o.established(Role::Responder) == 1);
  std::size_t duplicates = 0;
  for (const auto& e : o.log)
    if (e.node == "alice" && e.note == "duplicate broadcast") {
      ++duplicates;
      CHECK(e.disposition == "ignore");
    }
  CHECK(duplicates == 1);
  CHECK(judge("replay-b", o).matches);
}

TEST_CASE("wormhole replay to another location", "[sim]") {
  for (bool identical : {false, true}) {
    auto o = run_scenario(wormhole_spec(11, WormholeVariant::ReplayToP, identical));
    const auto* p = find_session(o, "service-p");
    REQUIRE(p);
    CHECK(p->phase == Phase::Failed);
    CHECK(o.established(Role::Responder) == 1);
    CHECK(find_session(o, "service-l")->phase == Phase::Established);
    CHECK_FALSE(o.flags.any());
    CHECK_FALSE(o.location_spoofed);
  }
}

TEST_CASE("wormhole range extension succeeds", "[sim]") {
  auto o = scenario_wormhole(12, WormholeVariant::RangeExtension);
  CHECK(find_session(o, "service-p")->phase == Phase::Established);
  CHECK(o.location_spoofed);
  CHECK_FALSE(o.flags.any());
  CHECK(judge("wormhole-extend", o).matches);
}

TEST_CASE("duplicate and bogus floods", "[sim]") {
  auto o = scenario_dos_duplicates(13, 100);
  CHECK(o.agents.at(0).phase == Phase::Established);
  CHECK(o.sessions.size() == 2);
  CHECK(o.dispositions["ignore"] >= 100);
  CHECK(o.dispositions["reject"] >= 100);
  CHECK_FALSE(o.flags.any());

  auto zero = run_scenario(dos_spec(14, 0));
  auto baseline = run_scenario(eavesdrop_spec(14));
  CHECK(zero.log == baseline.log);
}

TEST_CASE("wrong password in the simulator", "[sim]") {
  auto spec = eavesdrop_spec(15, TierMode::Tier2);
  spec.agents[0].wrong_password = true;
  auto o = run_scenario(spec);
  const auto* bob = find_session(o, "service-l");
  CHECK(bob->failure == ErrorCode::FinalAuthFailed);
  CHECK(o.agents[0].last_error == ErrorCode::PeerError);
}

TEST_CASE("catalog verdicts hold across seeds", "[sim]") {
  for (const auto& name : catalog_names())
    for (uint64_t seed = 100; seed < 105; ++seed) {
      auto o = run_scenario(*catalog_spec(name, seed));
      auto v = judge(name, o);
      INFO(name << " seed " << seed << " " << v.observed);
      CHECK(v.matches);
    }
  CHECK_FALSE(catalog_spec("jamming", 1));
}

TEST_CASE("secrets never appear on the wire", "[sim]") {
  World w(eavesdrop_spec(16));
  w.run();
  std::set<std::string> labels;
  for (const auto& s : w.secrets()) {
    labels.insert(s.label);
    if (s.value.size() >= 8) CHECK_FALSE(adversary_saw(w, s.value));
  }
  for (auto l : {"user_key", "spwd", "kpwd", "s", "tk", "n_b", "sk_ei", "sk_pr", "ltk"}) CHECK(labels.count(l));
}

TEST_CASE("reconstruction from long-term secrets fails", "[sim]") {
  World w(eavesdrop_spec(17));
  w.run();
  auto truth = w.session_truth();
  REQUIRE(truth.size() == 2);
  auto frames = w.session_frames(truth[0].ids);
  REQUIRE(frames.size() >= 6);
  auto result = reconstruct_key_schedules(frames, compromise(w, "alice@example.org"), at_seconds(1'700'000'001));
  CHECK(result.candidates.size() > 10);
  CHECK(result.frames_opened == 0);
  for (const auto& c : result.candidates) CHECK_FALSE(c == *truth[0].keys);

  // Positive control: slipping the initiator's ephemeral scalar in lets the same oracle succeed.
  auto leaked = compromise(w, "alice@example.org");
  for (const auto& s : w.secrets())
    if (s.owner == "alice" && s.label == "ephemeral") leaked.user_key = s.value;
  auto control = reconstruct_key_schedules(frames, leaked, at_seconds(1'700'000'001));
  CHECK(control.frames_opened > 0);
  CHECK(std::any_of(control.candidates.begin(), control.candidates.end(),
                    [&](const KeySchedule& c) { return c == *truth[0].keys; }));
}

TEST_CASE("scenario json round trip", "[sim]") {
  for (const auto& name : catalog_names()) {
    auto spec = *catalog_spec(name, 3);
    auto text = spec.to_json();
    auto back = ScenarioSpec::from_json(text);
    CHECK(back.to_json() == text);
    CHECK(run_scenario(back).to_json() == run_scenario(spec).to_json());
  }
}

TEST_CASE("scenario json errors", "[sim]") {
  auto code = [](const std::string& text) {
    try {
      ScenarioSpec::from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Format;
  };
  CHECK(code("{") == ErrorCode::ScenarioMisconfigured);
  CHECK(code(R"({"locations":["l"],"services":[]})") == ErrorCode::ScenarioMisconfigured);
  CHECK(code(R"({"locations":["l"],"services":[{"name":"s","location":"x","beacon_id":"0102030405060708"}]})") ==
        ErrorCode::ScenarioMisconfigured);
  CHECK(code(R"({"locations":["l"],"services":[{"name":"s","location":"l","beacon_id":"01"}]})") ==
        ErrorCode::ScenarioMisconfigured);
  CHECK(code(R"({"locations":["l"],"services":[{"name":"s","location":"l","beacon_id":"0102030405060708",
                 "policy":"AND("}]})") == ErrorCode::ScenarioMisconfigured);
  auto spec = eavesdrop_spec(1);
  spec.adversary.rules.push_back({MatchSpec{"HELLO", "", std::nullopt, std::nullopt}, {}});
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = eavesdrop_spec(1);
  spec.agents[0].attributes = {"city:mayor"};
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("outcome json", "[sim]") {
  auto o = scenario_eavesdrop(18);
  auto j = nlohmann::json::parse(o.to_json());
  CHECK(j["flags"]["learned_plaintext"] == false);
  CHECK(j["sessions"].size() == 2);
  CHECK(j["sessions"][0]["phase"] == "ESTABLISHED");
  CHECK(j["log"].size() == o.log.size());
  CHECK(j["sessions"][0]["sent"].get<std::string>().size() == 2 * o.sessions[0].sent.size());
}
