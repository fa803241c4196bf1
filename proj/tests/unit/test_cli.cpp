#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "joda/cli.hpp"
#include "support/fixtures.hpp"

using testsupport::fixture;
using testsupport::read_file;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = joda::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json last_error(const Run& r) {
  const auto start = r.err.rfind('{');
  REQUIRE(start != std::string::npos);
  return nlohmann::json::parse(r.err.substr(start));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("compile is byte-identical across runs and matches the golden file") {
    const auto dir = testsupport::scratch_dir("cli_compile");
    for (const char* name : {"a.json", "b.json"}) {
      const auto r = cli({"compile", "--context", fixture("context_door.json"), "--proposal",
                          fixture("proposals/p01_door_soft_close.json"), "-o", (dir / name).string()});
      CHECK(r.code == 0);
    }
    CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
    CHECK(read_file(dir / "a.json") == read_file(fixture("golden/door_composed.json")));
    fs::remove_all(dir);
  }

  TEST_CASE("validate") {
    CHECK(cli({"validate", fixture("proposals/p02_door_detent.json")}).code == 0);
    const auto bad = cli({"validate", fixture("bad_interval_proposal.json")});
    CHECK(bad.code == 1);
    const auto e = last_error(bad);
    CHECK(e["path"] == "effect_proposals[1].start_ratio");
    CHECK(e["error"] == "validation");
  }

  TEST_CASE("missing input file is an I/O error") {
    const auto r = cli({"validate", fixture("does_not_exist.json")});
    CHECK(r.code == 2);
    CHECK(last_error(r)["path"].get<std::string>().find("does_not_exist.json") != std::string::npos);
  }

  TEST_CASE("usage errors exit 1") {
    CHECK(cli({"compile", "--context", fixture("context_door.json")}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
  }

  TEST_CASE("plot and analyze reproduce the golden outputs") {
    const auto dir = testsupport::scratch_dir("cli_plot");
    const auto composed = fixture("golden/door_composed.json");
    CHECK(cli({"plot", composed, "-o", (dir / "p.svg").string(), "--annotate-equilibria", "--shade-stick",
               "--points", "201", "--csv", (dir / "p.csv").string()})
              .code == 0);
    CHECK(read_file(dir / "p.svg") == read_file(fixture("golden/door_profile.svg")));
    CHECK(read_file(dir / "p.csv").rfind("s,f_cons", 0) == 0);
    CHECK(cli({"analyze", composed, "-o", (dir / "a.json").string()}).code == 0);
    CHECK(nlohmann::json::parse(read_file(dir / "a.json")) ==
          nlohmann::json::parse(read_file(fixture("golden/door_analysis.json"))));
    fs::remove_all(dir);
  }

  TEST_CASE("simulate, and divergence exits 4") {
    const auto dir = testsupport::scratch_dir("cli_sim");
    const auto composed = fixture("golden/door_composed.json");
    testsupport::write_file(dir / "ok.json", R"({"initial": {"s": 0.8, "v": 0}, "steps": 200, "force": {"constant": -0.2}})");
    CHECK(cli({"simulate", composed, "--scenario", (dir / "ok.json").string(), "-o", (dir / "t.csv").string()}).code == 0);
    CHECK(read_file(dir / "t.csv").rfind("t,q,v,f_ext,f_hand\n", 0) == 0);
    testsupport::write_file(dir / "bad.json", R"({"config": {"dt": 5.0}, "initial": {"s": 0.5, "v": 20}, "steps": 500})");
    const auto r = cli({"simulate", composed, "--scenario", (dir / "bad.json").string(), "-o", (dir / "u.csv").string()});
    CHECK(r.code == 4);
    CHECK(last_error(r)["error"] == "numerical");
    fs::remove_all(dir);
  }

  TEST_CASE("baseline, interact and optimize") {
    const auto dir = testsupport::scratch_dir("cli_refine");
    CHECK(cli({"baseline", "--kind", "spring", "--context", fixture("context_door.json"), "-o",
               (dir / "base.json").string(), "--peak", "0.5", "--friction", "0.05"})
              .code == 0);
    testsupport::write_file(dir / "targets.csv", "t,s\n0,0.1\n1,0.8\n2,0.8\n");
    CHECK(cli({"interact", (dir / "base.json").string(), "--targets", (dir / "targets.csv").string(), "-o",
               (dir / "push.csv").string(), "--dt", "0.005"})
              .code == 0);
    const auto r = cli({"optimize", fixture("golden/door_composed.json"), "--targets", (dir / "push.csv").string(),
                        "-o", (dir / "report.json").string(), "--iters", "3", "--params", "conservative",
                        "--composed-out", (dir / "refined.json").string()});
    CHECK(r.code == 0);
    const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
    CHECK(report.contains("loss_history"));
    CHECK(fs::exists(dir / "refined.json"));
    fs::remove_all(dir);
  }

  TEST_CASE("propose with a replayed conversation") {
    const auto dir = testsupport::scratch_dir("cli_propose");
    const auto r = cli({"propose", "--context", fixture("context_door.json"), "--images", fixture("images"),
                        "--backend", "replay", "--replay", fixture("conversation/responses.json"), "-o",
                        dir.string()});
    CHECK(r.code == 0);
    CHECK(read_file(dir / "door_hinge" / "composed.json") == read_file(fixture("conversation/final_composed.json")));
    CHECK(fs::exists(dir / "door_hinge" / "round3" / "response.json"));
    fs::remove_all(dir);
  }

  TEST_CASE("network backend without a key exits 3") {
    ::unsetenv("JODA_API_KEY");
    const auto dir = testsupport::scratch_dir("cli_net");
    const auto r = cli({"propose", "--context", fixture("context_door.json"), "--no-images", "-o", dir.string()});
    CHECK(r.code == 3);
    fs::remove_all(dir);
  }
}
