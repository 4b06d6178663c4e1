#include <benchmark/benchmark.h>

#include "locathe/protocol.hpp"
#include "locathe/sim.hpp"

using namespace locathe;

namespace {

void BM_Prf(benchmark::State& state) {
  DeterministicRandom rng(1);
  PrfKey key(rng.bytes(32));
  Bytes data = rng.bytes(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(prf(key, data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Prf)->Arg(64)->Arg(1024);

void BM_KdfStretch(benchmark::State& state) {
  DeterministicRandom rng(2);
  Bytes secret = rng.bytes(32), salt = rng.bytes(16);
  for (auto _ : state)
    benchmark::DoNotOptimize(kdf_stretch(secret, salt, static_cast<uint32_t>(state.range(0))));
}
BENCHMARK(BM_KdfStretch)->Arg(1000)->Arg(kDefaultKdfIterations);

void BM_Ecdh(benchmark::State& state) {
  DeterministicRandom rng(3);
  auto a = ecdhe_keypair(rng);
  auto b = ecdhe_keypair(rng);
  for (auto _ : state) benchmark::DoNotOptimize(dh(a.secret, b.public_point));
}
BENCHMARK(BM_Ecdh);

struct AbeFixture {
  const AbeScheme& abe = default_abe_scheme();
  DeterministicRandom rng{4};
  AuthorityRegistry authorities;
  std::vector<UserAbeKey> keys;
  AccessPolicy policy = AccessPolicy::parse("AND(city:resident, OR(city:staff, mall:member), mall:gold)");

  AbeFixture() {
    authorities.setup(abe, "city", rng);
    authorities.setup(abe, "mall", rng);
    keys.push_back(abe.keygen(authorities.at("city"), "u", {{"city", "resident"}, {"city", "staff"}},
                              at_seconds(0), std::chrono::hours(1)));
    keys.push_back(abe.keygen(authorities.at("mall"), "u", {{"mall", "member"}, {"mall", "gold"}}, at_seconds(0),
                              std::chrono::hours(1)));
  }
};

void BM_AbeEncrypt(benchmark::State& state) {
  AbeFixture f;
  Bytes pt(32, 0x42);
  auto params = f.authorities.public_params();
  for (auto _ : state) benchmark::DoNotOptimize(f.abe.encrypt(params, f.policy, pt, f.rng));
}
BENCHMARK(BM_AbeEncrypt);

void BM_AbeDecrypt(benchmark::State& state) {
  AbeFixture f;
  auto ct = f.abe.encrypt(f.authorities.public_params(), f.policy, Bytes(32, 0x42), f.rng);
  for (auto _ : state) benchmark::DoNotOptimize(f.abe.decrypt(f.keys, ct, at_seconds(1)));
}
BENCHMARK(BM_AbeDecrypt);

void BM_Handshake(benchmark::State& state) {
  auto tier = static_cast<TierMode>(state.range(0));
  DeterministicRandom rng(5);
  ServiceRegistry registry(RegistryConfig{}, rng);
  registry.add_authority("city", {"resident"}, rng);
  Timestamp now = at_seconds(1'700'000'000);
  auto bundle = registry.register_user("alice", {{"city", "resident"}}, std::nullopt, now, rng);
  EndpointConfig cfg{BeaconConfig{{1, 2, 3, 4, 5, 6, 7, 8}, "lobby", kDefaultBroadcastInterval, kDefaultNbValidity,
                                  AccessPolicy::parse("city:resident")},
                     kDefaultAuthErrorDelay, 0, {}};
  ServiceEndpoint endpoint(registry, cfg, rng);
  for (auto _ : state) {
    auto advert = Advert::decode(endpoint.beacon_tick(now));
    auto fetched = endpoint.handle(make_fetch_request(advert.handle).encode(), now);
    auto s = InitiatorSession::start(bundle, fetched.replies.at(0).wire, {tier, {}, {}, {}}, now, rng);
    std::vector<Bytes> to_service{s.ke_req};
    while (!to_service.empty()) {
      std::vector<Bytes> to_alice;
      for (auto& m : to_service)
        for (auto& o : endpoint.handle(m, now).replies) to_alice.push_back(o.wire);
      to_service.clear();
      for (auto& m : to_alice)
        for (auto& o : s.session->handle(m, now).replies) to_service.push_back(o.wire);
    }
    if (s.session->phase() != Phase::Established) state.SkipWithError("handshake failed");
    endpoint.expire(now + std::chrono::seconds(60));
  }
}
BENCHMARK(BM_Handshake)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Scenario(benchmark::State& state) {
  const auto& name = sim::catalog_names().at(static_cast<std::size_t>(state.range(0)));
  state.SetLabel(name);
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_scenario(*sim::catalog_spec(name, 1)));
}
BENCHMARK(BM_Scenario)->DenseRange(0, 6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
