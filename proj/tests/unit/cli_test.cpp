#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "locathe/crypto.hpp"
#include "locathe/key_schedule.hpp"
#include "locathe/registration.hpp"
#include "locathe/sim.hpp"

using namespace locathe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("locathe-cli-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, '\t');) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("register writes a bundle without the user key", "[cli]") {
  TempDir dir;
  auto reg = dir.file("reg.json");
  auto r = run({"--registry", reg, "--seed", "1", "--at", "1700000000", "register", "alice", "--attrs",
                "city:resident,city:staff"});
  REQUIRE(r.code == 0);
  auto bundle = json::parse(r.out);
  CHECK(bundle.contains("spwd"));
  CHECK_FALSE(bundle.contains("user_key"));
  CHECK(r.out.find("user_key") == std::string::npos);

  auto loaded = ServiceRegistry::load(reg);
  CHECK(loaded->size() == 1);

  auto again = run({"--registry", reg, "--at", "1700000001", "register", "alice"});
  CHECK(again.code == cli::kAlreadyRegistered);
  CHECK(ServiceRegistry::load(reg)->size() == 1);

  CHECK(run({"--registry", reg, "--at", "1700000002", "register", "bob"}).code == 0);
  CHECK(ServiceRegistry::load(reg)->size() == 2);
}

TEST_CASE("register reports i/o failures", "[cli]") {
  TempDir dir;
  auto missing = dir.file("no/such/dir/reg.json");
  CHECK(run({"--registry", missing, "register", "alice"}).code == cli::kIo);
  auto garbage = dir.file("bad.json");
  std::ofstream(garbage) << "{";
  CHECK(run({"--registry", garbage, "registry-list"}).code == cli::kIo);
  CHECK(run({"--registry", dir.file("absent.json"), "registry-list"}).code == cli::kIo);
}

TEST_CASE("registry path from the environment", "[cli]") {
  TempDir dir;
  auto reg = dir.file("env-reg.json");
  ::setenv("LOCATHE_REGISTRY", reg.c_str(), 1);
  auto r = run({"--at", "1700000000", "register", "carol"});
  ::unsetenv("LOCATHE_REGISTRY");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(reg));
}

TEST_CASE("registry-list prints fingerprints only", "[cli]") {
  TempDir dir;
  auto reg = dir.file("reg.json");
  REQUIRE(run({"--registry", reg, "--seed", "2", "--at", "1700000000", "register", "alice"}).code == 0);
  auto r = run({"--registry", reg, "--at", "1700000001", "registry-list"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  REQUIRE(j["users"].size() == 1);
  CHECK(j["users"][0]["user_id"] == "alice");
  CHECK(j["users"][0]["active"] == true);

  auto rec = ServiceRegistry::load(reg)->records().at(0);
  CHECK(j["users"][0]["user_key_fp"] == fingerprint(rec.user_key));
  for (const auto& secret : {rec.user_key, rec.spwd, rec.token_seed.seed}) {
    CHECK(r.out.find(to_hex(secret)) == std::string::npos);
    CHECK(r.out.find(base64_encode(secret)) == std::string::npos);
  }
  auto hex = run({"--registry", reg, "--at", "1700000001", "--format", "hex", "registry-list"});
  CHECK(fields_of(lines_of(hex.out).at(0)).at(0) == "alice");
}

TEST_CASE("demo handshakes", "[cli]") {
  for (std::string tier : {"1", "2", "both"}) {
    auto r = run({"--seed", "7", "--tier", tier, "demo"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["established"] == true);
    CHECK(j["failure_phase"].is_null());
    CHECK(j["initiator"]["phase"] == "ESTABLISHED");
    CHECK(j["responder"]["phase"] == "ESTABLISHED");
    CHECK(j["initiator"]["fingerprints"] == j["responder"]["fingerprints"]);
    CHECK(j["initiator"]["fingerprints"]["long_term_secret"].get<std::string>().size() == 8);
    // advert, fetch request and response, then the handshake itself
    CHECK(j["transcript"].size() == 3 + (tier == "both" ? 8u : 6u));
    for (const auto& m : j["transcript"]) {
      CHECK((m["direction"] == "i2r" || m["direction"] == "r2i"));
      CHECK(m["type"] != "UNKNOWN");
    }
  }
}

TEST_CASE("demo with a wrong password fails in the final stage", "[cli]") {
  auto r = run({"--seed", "7", "--tier", "2", "demo", "--wrong-password"});
  CHECK(r.code == cli::kHandshakeFailed);
  auto j = json::parse(r.out);
  CHECK(j["established"] == false);
  CHECK(j["failure_phase"] == "final");
  CHECK(j["responder"]["failure"] == "FinalAuthFailed");
}

TEST_CASE("demo with unsatisfied policy fails before key exchange", "[cli]") {
  auto r = run({"--seed", "7", "--tier", "1", "demo", "--policy", "city:staff"});
  CHECK(r.code == cli::kHandshakeFailed);
  auto j = json::parse(r.out);
  CHECK(j["failure_phase"] == "broadcast");
  CHECK(j["transcript"].size() == 3);
}

TEST_CASE("demo is deterministic under a seed", "[cli]") {
  auto a = run({"--seed", "42", "demo"});
  auto b = run({"--seed", "42", "demo"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != run({"--seed", "43", "demo"}).out);
  auto hex = run({"--seed", "42", "--format", "hex", "demo"});
  CHECK(lines_of(hex.out).size() == 11);
}

TEST_CASE("demo transcript holds no secrets", "[cli]") {
  auto r = run({"--seed", "9", "demo"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  // Every hex field in the transcript is a wire message; fingerprints are 8 characters.
  for (const auto& [role, side] : {std::pair{"initiator", j["initiator"]}, std::pair{"responder", j["responder"]}})
    for (const auto& [k, v] : side["fingerprints"].items()) CHECK(v.get<std::string>().size() == 8);
}

TEST_CASE("demo against a registry file", "[cli]") {
  TempDir dir;
  auto reg = dir.file("reg.json");
  auto bundle = dir.file("alice.bundle.json");
  REQUIRE(run({"--registry", reg, "--seed", "3", "--at", "1700000000", "--output", bundle, "register", "alice"})
              .code == 0);
  auto by_user = run({"--registry", reg, "--seed", "4", "--at", "1700000100", "demo", "--user", "alice"});
  INFO(by_user.err);
  CHECK(by_user.code == 0);
  auto by_bundle = run({"--registry", reg, "--seed", "4", "--at", "1700000100", "demo", "--bundle", bundle});
  CHECK(by_bundle.code == 0);
  CHECK(by_user.out == by_bundle.out);
  // Fifteen days later the registration has lapsed.
  auto late = run({"--registry", reg, "--seed", "4", "--at", "1701296100", "demo", "--user", "alice"});
  CHECK(late.code == cli::kHandshakeFailed);
  CHECK(run({"--registry", reg, "--at", "1700000100", "demo", "--user", "mallory"}).code == cli::kHandshakeFailed);
}

TEST_CASE("attack scenarios", "[cli]") {
  auto mitm = run({"--seed", "5", "attack", "mitm"});
  INFO(mitm.err);
  REQUIRE(mitm.code == 0);
  auto j = json::parse(mitm.out);
  for (const auto& [k, v] : j["outcome"]["flags"].items()) CHECK(v == false);
  CHECK(j["verdict"]["matches"] == true);

  auto ext = run({"--seed", "5", "attack", "wormhole-extend"});
  CHECK(ext.code == 0);
  CHECK(json::parse(ext.out)["outcome"]["location_spoofed"] == true);

  auto bogus = run({"attack", "bogus"});
  CHECK(bogus.code == cli::kUnknownScenario);
  CHECK(bogus.out.empty());

  CHECK(run({"--seed", "5", "attack", "mitm"}).out == mitm.out);
}

TEST_CASE("attack from a scenario file", "[cli]") {
  TempDir dir;
  auto path = dir.file("scenario.json");
  std::ofstream(path) << sim::catalog_spec("replay-b", 8)->to_json();
  auto r = run({"attack", "--file", path});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["scenario"] == "replay-b");
  CHECK(run({"attack", "--file", dir.file("missing.json")}).code == cli::kIo);
  CHECK(run({"attack"}).code == cli::kFailure);
}

TEST_CASE("vectors cover every pinned derivation", "[cli]") {
  auto r = run({"vectors"});
  REQUIRE(r.code == 0);
  std::set<std::string> ops;
  for (const auto& line : lines_of(r.out)) {
    auto f = fields_of(line);
    REQUIRE(f.size() >= 3);
    ops.insert(f[0].substr(0, f[0].find('.')));
    for (std::size_t i = 1; i < f.size(); ++i) CHECK_NOTHROW(from_hex(f[i]));
  }
  for (auto op : {"prf", "prf_plus", "kdf_stretch", "totp", "keyseed", "sks", "kpwd", "enonce", "ge", "gtk",
                  "auth_t1", "auth_t2", "final_auth", "ltk"})
    CHECK(ops.count(op));

  CHECK(run({"vectors"}).out == r.out);
  CHECK(run({"--seed", "2", "vectors"}).out != r.out);
}

TEST_CASE("vector filter", "[cli]") {
  auto all = run({"vectors"});
  auto only = run({"vectors", "prf"});
  REQUIRE(only.code == 0);
  auto lines = lines_of(only.out);
  CHECK(lines.size() == 3);
  for (const auto& l : lines) {
    CHECK(l.rfind("prf.", 0) == 0);
    CHECK(all.out.find(l) != std::string::npos);
  }
  CHECK(run({"vectors", "nothing"}).code == cli::kFailure);
  auto j = json::parse(run({"--format", "json", "vectors", "ltk"}).out);
  CHECK(j.size() == 3);
}

TEST_CASE("vectors agree with independent computation", "[cli]") {
  for (const auto& line : lines_of(run({"vectors", "prf"}).out)) {
    auto f = fields_of(line);
    CHECK(to_hex(prf(PrfKey(from_hex(f[1])), from_hex(f[2]))) == f[3]);
  }
  for (const auto& line : lines_of(run({"vectors", "kpwd"}).out)) {
    auto f = fields_of(line);
    auto spi = from_hex(f[4]);
    SessionIds ids;
    std::copy(spi.begin(), spi.begin() + 8, ids.spi_i.begin());
    std::copy(spi.begin() + 8, spi.end(), ids.spi_r.begin());
    CHECK(to_hex(prf(PrfKey(from_hex(f[1])), concat(from_hex(f[2]), from_hex(f[3]), spi))) == f[5]);
  }
}

TEST_CASE("usage errors", "[cli]") {
  CHECK(run({}).code == cli::kFailure);
  CHECK(run({"--tier", "3", "demo"}).code == cli::kFailure);
  CHECK(run({"--help"}).code == 0);
}
