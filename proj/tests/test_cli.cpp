#include <doctest.h>

#include "cli.hpp"
#include "clfstab/clf_smooth.hpp"
#include "clfstab/iss_analysis.hpp"
#include "clfstab/obstructions.hpp"
#include "clfstab/robust.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code{0};
  std::string out;
  std::string err;
  json error() const { return json::parse(err); }
  json report() const { return json::parse(out); }
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = clfstab::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "clfstab_test_cli";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name);
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string example(const std::string& name) { return std::string(CLFSTAB_EXAMPLES_DIR) + "/" + name; }

}  // namespace

TEST_CASE("zoo command") {
  const auto list = cli({"zoo", "list"});
  REQUIRE(list.code == 0);
  const auto j = list.report();
  CHECK(j.size() == clfstab::zoo_catalog().size());
  CHECK(j[0]["name"] == "cubic-1d");
  const auto show = cli({"zoo", "show", "shopping-cart"});
  REQUIRE(show.code == 0);
  CHECK(show.report()["n"] == 3);
  CHECK(show.report()["driftless"] == true);
  const auto bad = cli({"zoo", "show", "bicycle"});
  CHECK(bad.code == 2);
  CHECK(bad.error()["kind"] == "UnknownName");
  CHECK(bad.error()["exit_code"] == 2);
  CHECK(bad.out.empty());
}

TEST_CASE("parse errors exit with the validation code") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"levitate"}).code == 2);
  CHECK(cli({"simulate", "--system", "integrator", "--warp", "9"}).code == 2);
  CHECK(cli({"simulate", "--system", "integrator", "--x0", "1", "--horizon", "ten"}).code == 2);
  CHECK(cli({"simulate", "--system", "integrator", "--x0", "1,2"}).error()["kind"] == "DimensionMismatch");
  CHECK(cli({"simulate", "--system", "integrator", "--x0", "1", "--feedback", "expr:x1+"}).code == 2);
  CHECK(cli({"simulate", "--system", "cubic-1d", "--x0", "1", "--feedback", "universal"}).error()["kind"] == "NotAffine");
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("simulate writes CSV and a summary") {
  const auto csv = scratch("sim.csv");
  const auto r = cli({"simulate", "--system", "scalar-linear", "--params", "a=-1", "--feedback", "zero", "--x0", "1",
                      "--horizon", "1", "--schedule", "uniform:0.1", "--substeps", "16", "--out", csv.string()});
  REQUIRE(r.code == 0);
  const auto summary = r.report();
  CHECK(summary["final_norm"].get<double>() == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  CHECK(summary["samples"] == 11);
  const std::string text = slurp(csv);
  CHECK(text.rfind("t,x1,u1,is_sample\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + summary["rows"].get<int>());

  const auto stdout_mode = cli({"simulate", "--system", "scalar-linear", "--params", "a=-1", "--feedback", "zero", "--x0",
                                "1", "--horizon", "1", "--schedule", "uniform:0.1", "--substeps", "16"});
  CHECK(stdout_mode.out == text);

  const auto samples = cli({"simulate", "--system", "integrator", "--feedback", "expr:-x1", "--x0", "1", "--horizon", "1",
                            "--schedule", "uniform:0.25", "--samples-only"});
  REQUIRE(samples.code == 0);
  CHECK(std::count(samples.out.begin(), samples.out.end(), '\n') == 6);
}

TEST_CASE("simulate exit codes") {
  const auto esc = cli({"simulate", "--system", "gas-not-iss", "--feedback", "expr:1", "--x0", "0", "--horizon", "5"});
  CHECK(esc.code == 3);
  CHECK(esc.error()["kind"] == "Escape");

  const auto csv = scratch("strict.csv");
  const auto strict = cli({"simulate", "--system", "integrator", "--feedback", "expr:-x1", "--x0", "1", "--horizon", "1",
                           "--expect-final-norm", "1e-3", "--strict", "--out", csv.string()});
  CHECK(strict.code == 4);
  CHECK(strict.error()["kind"] == "CheckFailed");
  CHECK(strict.report()["checks"]["final_norm_below"]["passed"] == false);
  const auto lax = cli({"simulate", "--system", "integrator", "--feedback", "expr:-x1", "--x0", "1", "--horizon", "20",
                        "--expect-final-norm", "1e-3", "--strict", "--out", csv.string()});
  CHECK(lax.code == 0);
  CHECK(lax.report()["checks"]["final_norm_below"]["passed"] == true);

  // the proximal law is discontinuous but sampled simulation accepts it
  const auto prox_csv = scratch("prox.csv");
  const auto prox = cli({"simulate", "--system", "artstein-circles", "--feedback", "proximal", "--x0", "0.6,0.8",
                         "--horizon", "2", "--schedule", "uniform:0.01", "--out", prox_csv.string()});
  CHECK(prox.code == 0);
  CHECK(prox.report()["continuity"] == "measurable-discontinuous");
  CHECK(slurp(prox_csv).rfind("t,x1,x2,u1,V,Valpha,is_sample\n", 0) == 0);
}

TEST_CASE("config files") {
  const auto out = scratch("cfg.csv");
  const std::string good = write_file("good.json", json{{"schema", 1}, {"command", "simulate"}, {"system", "integrator"},
                                                         {"feedback", "expr:-x1"}, {"x0", {2.0}}, {"horizon", 1}}
                                                        .dump());
  const auto a = cli({"simulate", "--config", good, "--out", out.string()});
  REQUIRE(a.code == 0);
  CHECK(a.report()["x0"][0] == 2.0);
  // flags override the file
  const auto b = cli({"simulate", "--config", good, "--x0", "3", "--out", out.string()});
  REQUIRE(b.code == 0);
  CHECK(b.report()["x0"][0] == 3.0);

  const std::string unknown = write_file("unknown.json", R"({"schema": 1, "command": "simulate", "sytem": "integrator"})");
  const auto bad_out = scratch("never.csv");
  const auto c = cli({"simulate", "--config", unknown, "--out", bad_out.string()});
  CHECK(c.code == 2);
  CHECK_FALSE(fs::exists(bad_out));
  CHECK(cli({"simulate", "--config", write_file("v2.json", R"({"schema": 2, "command": "simulate"})")}).code == 2);
  CHECK(cli({"simulate", "--config", write_file("cmd.json", R"({"schema": 1, "command": "zoo"})")}).code == 2);
  CHECK(cli({"simulate", "--config", write_file("broken.json", "{\"schema\": 1,")}).code == 2);
  CHECK(cli({"simulate", "--config", scratch("missing.json").string()}).code == 2);
  CHECK_FALSE(fs::exists(bad_out));
  CHECK(cli({"simulate", "--config", example("simulate_rigid_body.json"), "--out", out.string()}).code == 0);
}

TEST_CASE("synthesize") {
  const auto r = cli({"synthesize", "--system", "integrator", "--method", "universal", "--clf", "quadratic", "--grid", "3",
                      "--extent", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "x1,V,u1\n-1,0.5,1\n0,0,0\n1,0.5,-1\n");
  const auto prox = cli({"synthesize", "--system", "artstein-circles", "--method", "proximal", "--grid", "5"});
  REQUIRE(prox.code == 0);
  CHECK(prox.out.rfind("x1,x2,Valpha,u1\n", 0) == 0);
  CHECK(cli({"synthesize", "--system", "uuu", "--method", "universal"}).error()["kind"] == "NotAffine");
  CHECK(cli({"synthesize", "--system", "integrator", "--grid", "2000000"}).code == 2);
  CHECK(cli({"synthesize", "--system", "integrator", "--method", "magic"}).code == 2);
}

TEST_CASE("clf-verify") {
  const auto r = cli({"clf-verify", "--system", "artstein-circles"});
  REQUIRE(r.code == 0);
  const auto rep = clfstab::region_report_from_json(r.report());
  REQUIRE_FALSE(rep.violations.empty());
  for (const auto& v : rep.violations) CHECK(v.x[0] == 0.0);
  CHECK(cli({"clf-verify", "--system", "artstein-circles", "--strict"}).code == 4);
  const auto di = cli({"clf-verify", "--system", "double-integrator", "--strict"});
  CHECK(di.code == 0);
  CHECK(di.report()["ok"] == true);
  CHECK(cli({"clf-verify", "--system", "double-integrator", "--grid", "21"}).error()["kind"] == "InvalidParams");
  CHECK(cli({"clf-verify", "--system", "integrator", "--region", "2:1"}).code == 2);
}

TEST_CASE("check-brockett") {
  const auto nh = cli({"check-brockett", "--system", "nonholonomic-integrator"});
  REQUIRE(nh.code == 0);
  const auto v = clfstab::brockett_verdict_from_json(nh.report());
  CHECK(v.fails());
  CHECK(cli({"check-brockett", "--system", "nonholonomic-integrator", "--strict"}).code == 4);
  const auto rb = cli({"check-brockett", "--system", "rigid-body-reduced", "--strict"});
  CHECK(rb.code == 0);
  CHECK(rb.report()["status"] == "inconclusive");
  CHECK(cli({"check-brockett", "--system", "uuu"}).report()["evidence"] == "EMPIRICAL");
  CHECK(cli({"check-brockett", "--system", "double-integrator", "--method", "linear"}).report()["test"] == "linear_rank");
  CHECK(cli({"check-brockett", "--system", "cubic-1d", "--method", "driftless"}).code == 2);
}

TEST_CASE("iss-fit") {
  const auto r = cli({"iss-fit", "--system", "scalar-linear", "--params", "a=-1", "--amplitudes", "0.5,1", "--x0-grid",
                      "-1;1", "--horizon", "30"});
  REQUIRE(r.code == 0);
  const auto probe = clfstab::gain_probe_from_json(r.report());
  REQUIRE(probe.rows.size() == 2);
  for (const auto& row : probe.rows) CHECK(row.limsup == doctest::Approx(row.amplitude).epsilon(1e-4));
  CHECK(r.report()["linear_gain"].get<double>() == doctest::Approx(1.0).epsilon(1e-4));

  const auto esc = cli({"iss-fit", "--system", "gas-not-iss", "--amplitudes", "0.1,1", "--x0-grid", "0", "--horizon", "20"});
  REQUIRE(esc.code == 0);
  CHECK(esc.report()["rows"][1]["escaped"] == true);

  const auto file = cli({"iss-fit", "--system", "arctan-iiss", "--inputs", example("gain_inputs.json"), "--x0-grid", "0",
                         "--horizon", "20"});
  CHECK(file.code == 0);

  CHECK(cli({"iss-fit", "--system", "scalar-linear", "--params", "a=-1", "--amplitudes", "1", "--x0-grid", ""}).code == 2);
  CHECK(cli({"iss-fit", "--system", "scalar-linear", "--params", "a=-1", "--amplitudes", "", "--x0-grid", "1"}).code == 2);
  std::string amps, states;
  for (int i = 0; i < 1001; ++i) {
    amps += (i ? "," : "") + std::to_string(i * 1e-3);
    states += (i ? ";" : "") + std::to_string(i * 1e-3);
  }
  CHECK(cli({"iss-fit", "--system", "scalar-linear", "--params", "a=-1", "--amplitudes", amps, "--x0-grid", states}).code ==
        2);
}

TEST_CASE("lyap-verify") {
  const auto ok = cli({"lyap-verify", "--candidate", example("arctan_iiss_candidate.json"), "--strict"});
  REQUIRE(ok.code == 0);
  const auto rep = clfstab::lyapunov_report_from_json(ok.report());
  CHECK(rep.ok());

  auto cand = json::parse(slurp(example("arctan_iiss_candidate.json")));
  cand["form"] = "iss";
  const auto iss = cli({"lyap-verify", "--candidate", write_file("iss.json", cand.dump())});
  CHECK(iss.code == 2);
  CHECK(iss.error()["kind"] == "InvalidCandidate");

  const std::string greedy = write_file(
      "greedy.json", json{{"schema", 1}, {"name", "greedy"}, {"system", "scalar-linear"}, {"params", {{"a", -1}}},
                          {"V", "x1^2/2"}, {"form", "iss"}, {"alpha", "r^2"}, {"gamma", "s^2/2"}}
                         .dump());
  const auto g = cli({"lyap-verify", "--candidate", greedy});
  CHECK(g.code == 0);
  CHECK(g.report()["ok"] == false);
  CHECK(cli({"lyap-verify", "--candidate", greedy, "--strict"}).code == 4);
  CHECK(cli({"lyap-verify", "--candidate", write_file("nov.json", R"({"schema": 1, "system": "integrator"})")}).code == 2);
}

TEST_CASE("sweep-robustness") {
  const auto r = cli({"sweep-robustness", "--system", "integrator", "--clf", "quadratic", "--control-set", "interval:-1:1",
                      "--r", "0.5", "--R", "2", "--states", "2", "--schedules", "compliant", "--errors",
                      "none,radial-outward:1", "--substeps", "4"});
  REQUIRE(r.code == 0);
  const auto rep = clfstab::robust_report_from_json(r.report());
  CHECK(rep.cells.size() == 4);
  CHECK(rep.failures() == 0);
  CHECK(rep.constants.gamma_r == doctest::Approx(0.125));
  CHECK(cli({"sweep-robustness", "--system", "integrator", "--clf", "quadratic", "--r", "1.5", "--R", "2"}).error()["kind"] ==
        "PreconditionFailed");
  CHECK(cli({"sweep-robustness", "--system", "integrator", "--clf", "quadratic", "--states", "0"}).code == 2);
  CHECK(cli({"sweep-robustness", "--system", "integrator", "--clf", "quadratic", "--x0-grid", "5"}).code == 2);
}

TEST_CASE("repeat runs are byte identical") {
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--system", "artstein-circles", "--feedback", "proximal", "--x0", "0.6,0.8", "--horizon", "1",
       "--schedule", "jitter:0.01:0.3:5", "--e", "piecewise-constant:0.001:0.05:9"},
      {"synthesize", "--system", "double-integrator", "--method", "pointwise", "--grid", "7"},
      {"check-brockett", "--system", "uuu"},
      {"iss-fit", "--system", "arctan-iiss", "--amplitudes", "0.1,0.5", "--x0-grid", "0;1", "--horizon", "10"},
  };
  for (const auto& args : commands) {
    const auto a = cli(args);
    const auto b = cli(args);
    CAPTURE(args[0]);
    CHECK(a.code == 0);
    CHECK(!a.out.empty());
    CHECK(a.out == b.out);
  }
}
