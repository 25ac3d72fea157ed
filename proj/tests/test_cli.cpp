#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "shapestab/cli.hpp"
#include "support.hpp"

using namespace shapestab;
using namespace shapestab::cli;
using namespace shapestab::testing;

namespace fs = std::filesystem;

namespace {

const std::string kData = SHAPESTAB_DATA_DIR;

std::string net_path(const std::string& name) { return kData + "/networks/" + name + ".json"; }
std::string sim_path(const std::string& name) { return kData + "/sim/" + name + ".json"; }

struct Captured {
  std::ostringstream out;
  std::ostringstream err;
  Output io(const std::string& dir = "") { return Output{dir, out, err}; }
};

fs::path scratch_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("shapestab_test_" + tag);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("analyze: symmetric triangle") {
  Captured c;
  REQUIRE(cmd_analyze(net_path("pairs3"), c.io()) == 0);
  const auto j = json::parse(c.out.str());
  CHECK(j["connected"] == true);
  CHECK(j["status"] == "POSITIVE");
  CHECK(j["erp_exists"] == true);
  CHECK(j["serp_exists"] == true);
  CHECK(j["slack"] == "1/3");
  CHECK(j["manifest"]["subcommand"] == "analyze");
  CHECK_FALSE(j["manifest"].contains("timestamp"));
}

TEST_CASE("analyze: star is infeasible with a certificate") {
  Captured c;
  REQUIRE(cmd_analyze(net_path("star3"), c.io()) == 0);
  const auto j = json::parse(c.out.str());
  CHECK(j["status"] == "INFEASIBLE");
  CHECK(j["slack"] == "-1/6");
  CHECK(j["certificate"]["b"] == json::array({"2/3", "-1/3", "-1/3"}));
}

TEST_CASE("analyze: disconnected net warns") {
  Captured c;
  REQUIRE(cmd_analyze(net_path("two_pairs"), c.io()) == 0);
  const auto j = json::parse(c.out.str());
  CHECK(j["connected"] == false);
  REQUIRE(j["warnings"].size() == 1);
  CHECK(j["warnings"][0].get<std::string>().find("positive recurrence") != std::string::npos);
}

TEST_CASE("analyze is byte-identical on rerun") {
  Captured a, b;
  cmd_analyze(net_path("pairs4"), a.io());
  cmd_analyze(net_path("pairs4"), b.io());
  CHECK(a.out.str() == b.out.str());
}

TEST_CASE("drift-check examples") {
  Captured c;
  DriftCheckArgs args;
  args.net_file = net_path("pairs3");
  args.configurations = {"2,1,0"};
  REQUIRE(cmd_drift_check(args, c.io()) == 0);
  auto j = json::parse(c.out.str());
  CHECK(j["cases"][0]["delta_f"] == "-2/3");
  CHECK(j["cases"][0]["match"] == true);

  Captured p;
  args.policy = R"({"policy":"pserp","epsilon":"1/12"})";
  REQUIRE(cmd_drift_check(args, p.io()) == 0);
  j = json::parse(p.out.str());
  CHECK(j["cases"][0]["delta_f"] == "0/1");
  CHECK(j["cases"][0]["match"] == true);

  Captured s;
  args.policy = "jsq";
  args.configurations.clear();
  args.sweep_seed = 7;
  REQUIRE(cmd_drift_check(args, s.io()) == 0);
  j = json::parse(s.out.str());
  CHECK(j["cases"].size() == 100);
  CHECK(j["all_match"] == true);
}

TEST_CASE("drift-check on an infeasible net degrades with a notice") {
  Captured c;
  DriftCheckArgs args;
  args.net_file = net_path("star3");
  args.policy = "pserp";
  args.configurations = {"3,0,1"};
  REQUIRE(cmd_drift_check(args, c.io()) == 0);
  const auto j = json::parse(c.out.str());
  CHECK(j["mode"] == "oracle-only");
  CHECK_FALSE(j["notices"].empty());
}

TEST_CASE("certify examples") {
  Captured c;
  CertifyArgs args;
  args.net_file = net_path("pairs3_boundary");
  REQUIRE(cmd_certify(args, c.io()) == 0);
  auto j = json::parse(c.out.str());
  CHECK(j["certificate"]["b"] == json::array({"1/3", "1/3", "-2/3"}));

  Captured star;
  args.net_file = net_path("star3");
  REQUIRE(cmd_certify(args, star.io()) == 0);
  j = json::parse(star.out.str());
  CHECK(j["all_nonnegative"] == true);

  Captured pos;
  args.net_file = net_path("pairs3");
  CHECK(guarded(pos.io(), [&] { return cmd_certify(args, pos.io()); }) == 1);
  CHECK(pos.err.str().find("no certificate: positive solution exists") != std::string::npos);
}

TEST_CASE("simulate: alternation histogram, files and default seed") {
  Captured c;
  const auto dir = scratch_dir("alt");
  REQUIRE(cmd_simulate(sim_path("alternation"), Overrides{}, c.io(dir.string())) == 0);
  const auto j = json::parse(c.out.str());
  CHECK(j["tau_histogram"] == json::parse(R"({"2": 5})"));
  CHECK(j["manifest"]["parameters"]["seed"] == 0);
  CHECK(fs::exists(dir / "stats.json"));
  CHECK(fs::exists(dir / "magnitude.csv"));
  const auto manifest = json::parse(read_file((dir / "manifest.json").string()));
  CHECK(manifest.contains("timestamp"));
  CHECK(manifest["parameters"]["seed"] == 0);
  fs::remove_all(dir);
}

TEST_CASE("simulate: reruns with equal seeds are identical; smoke run is fast") {
  Captured a, b;
  const auto dir = scratch_dir("rerun");
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(cmd_simulate(sim_path("jsq_pairs3"), Overrides{}, a.io(dir.string())) == 0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 5.0);
  REQUIRE(cmd_simulate(sim_path("jsq_pairs3"), Overrides{}, b.io(dir.string())) == 0);
  CHECK(a.out.str() == b.out.str());
  Captured d;
  REQUIRE(cmd_simulate(sim_path("jsq_pairs3"), Overrides{std::uint64_t{99}, std::nullopt, std::nullopt}, d.io(dir.string())) == 0);
  CHECK(a.out.str() != d.out.str());
  CHECK(json::parse(d.out.str())["manifest"]["parameters"]["seed"] == 99);
  fs::remove_all(dir);
}

TEST_CASE("transient verdict still exits 0") {
  Captured c;
  const auto dir = scratch_dir("transient");
  REQUIRE(cmd_simulate(sim_path("jsq_star3"), Overrides{std::nullopt, 2, 20'000}, c.io(dir.string())) == 0);
  fs::remove_all(dir);
  const auto j = json::parse(c.out.str());
  CHECK(j["diagnostic"]["verdict"] == "TRANSIENT_CONSISTENT");
}

TEST_CASE("exit codes") {
  Captured missing;
  CHECK(guarded(missing.io(), [&] { return cmd_analyze(kData + "/nope.json", missing.io()); }) == 1);
  Captured bad;
  const auto dir = scratch_dir("bad");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"n": 2, "neighborhoods": [[0, 1]], "rates": ["1/2"]})";
  }
  CHECK(guarded(bad.io(), [&] { return cmd_validate((dir / "bad.json").string(), bad.io()); }) == 1);
  CHECK(guarded(bad.io(), [&] { return cmd_analyze((dir / "bad.json").string(), bad.io()); }) == 1);
  Captured internal;
  CHECK(guarded(internal.io(), [&]() -> int { throw CertificateError("forced"); }) == 2);
  fs::remove_all(dir);
}

TEST_CASE("option parsing helpers") {
  CHECK(parse_configuration("2,1,0") == cfg({2, 1, 0}));
  CHECK_THROWS(parse_configuration("2,-1"));
  CHECK_THROWS(parse_configuration("a"));
  CHECK(parse_policy_option("jsq").name == "jsq");
  CHECK(*parse_policy_option(R"({"policy":"pserp","epsilon":"1/12"})").epsilon == Rational(1, 12));
  const auto sweep = sweep_configurations(3, 7, 100, 20);
  CHECK(sweep.size() == 100);
  CHECK(sweep == sweep_configurations(3, 7, 100, 20));
  for (const auto& x : sweep) {
    for (auto v : x.loads) {
      CHECK(v >= 0);
      CHECK(v <= 20);
    }
  }
}
