// End-to-end tests of the command-line tool: every case shells out to the
// built binary (path injected via PWLE_CLI_PATH) inside a throwaway
// directory, then inspects the artifacts it wrote.

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwle/fit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Run the CLI with the given arguments inside `dir`, capturing streams.
RunResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "_stdout.txt";
  const fs::path err = dir / "_stderr.txt";
  std::string cmd = "cd " + dir.string() + " && " + std::string(PWLE_CLI_PATH) +
                    " " + args + " > " + out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

/// Fresh working directory for one test case.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("pwle_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

json parse_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(bool(in), "missing file ", p.string());
  return json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help text lists all subcommands") {
  TempDir t("help");
  RunResult r = run_cli(t.path, "--help");
  CHECK(r.exit_code == 0);
  for (const char* name : {"simulate", "transform", "threshold", "fit",
                           "extrapolate", "diagnose", "study"})
    CHECK_MESSAGE(r.out.find(name) != std::string::npos, "missing ", name);

  CHECK(run_cli(t.path, "fit --bogus-flag x").exit_code != 0);
  CHECK(run_cli(t.path, "").exit_code != 0);  // a subcommand is required
}

TEST_CASE("simulate is deterministic in the seed and writes a manifest") {
  TempDir t("simdet");
  RunResult a = run_cli(t.path,
                        "simulate --family logistic --alpha 0.4 --n 5000 "
                        "--seed 7 --out a.csv");
  RunResult b = run_cli(t.path,
                        "simulate --family logistic --alpha 0.4 --n 5000 "
                        "--seed 7 --out b.csv");
  RunResult c = run_cli(t.path,
                        "simulate --family logistic --alpha 0.4 --n 5000 "
                        "--seed 8 --out c.csv");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(c.exit_code == 0);
  CHECK(slurp(t.path / "a.csv") == slurp(t.path / "b.csv"));
  CHECK(slurp(t.path / "a.csv") != slurp(t.path / "c.csv"));
  CHECK(count_lines(t.path / "a.csv") == 5001);  // header + rows

  const json m = parse_file(t.path / "a.csv.manifest.json");
  CHECK(m.at("command") == "simulate");
  CHECK(m.at("config").at("seed") == 7);
  CHECK(m.at("config_hash").get<std::string>().size() == 16);
  CHECK(m.at("versions").contains("pwle"));
  CHECK(m.at("versions").contains("eigen"));
  // same configuration -> same hash; different seed -> different hash
  const json mb = parse_file(t.path / "b.csv.manifest.json");
  const json mc = parse_file(t.path / "c.csv.manifest.json");
  CHECK(mb.at("config").at("seed") == 7);
  CHECK(m.at("config_hash") != mc.at("config_hash"));
}

TEST_CASE("pipeline chain: threshold, fit, extrapolate, diagnose") {
  TempDir t("chain");
  REQUIRE(run_cli(t.path,
                  "simulate --distribution 1 --n 2500 --seed 11 --out raw.csv")
              .exit_code == 0);

  // threshold: exceedance table + metadata sidecar
  RunResult thr = run_cli(
      t.path, "threshold --in raw.csv --tau 0.95 --out exc.csv");
  REQUIRE(thr.exit_code == 0);
  {
    std::ifstream in(t.path / "exc.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "w1,w2,r,r_tau");
    double w1, w2, r, rt;
    char comma;
    int rows = 0;
    while (in >> w1 >> comma >> w2 >> comma >> r >> comma >> rt) {
      CHECK(r > rt);  // every kept row exceeds its threshold
      CHECK(w1 + w2 == doctest::Approx(1.0).epsilon(1e-9));
      ++rows;
    }
    CHECK(rows > 50);
    const json meta = parse_file(t.path / "exc.meta.json");
    CHECK(meta.at("tau") == 0.95);
    CHECK(meta.at("source_size") == 2500);
    CHECK(meta.at("d") == 2);
    CHECK(count_lines(t.path / "exc.csv") == rows + 1);
  }

  // fit: model JSON that the library can load back
  RunResult fit = run_cli(t.path,
                          "fit --exceedances exc.csv --bounded --out "
                          "model.json");
  REQUIRE_MESSAGE(fit.exit_code == 0, fit.err);
  {
    pwle::fit::FittedModel m = pwle::fit::load_model((t.path / "model.json").string());
    CHECK(m.config.ss_label == "SS2");
    CHECK(m.primary().dim() == 2);
    CHECK(m.tau == doctest::Approx(0.95));
    const json mani = parse_file(t.path / "model.json.manifest.json");
    CHECK(mani.at("command") == "fit");
    CHECK(mani.at("config").at("bounded") == true);
  }

  // extrapolate: default regions, deterministic report
  RunResult ext = run_cli(t.path,
                          "extrapolate --model model.json --exceedances "
                          "exc.csv --seed 3 --out report.json");
  REQUIRE_MESSAGE(ext.exit_code == 0, ext.err);
  {
    const json rep = parse_file(t.path / "report.json");
    REQUIRE(rep.at("estimates").size() == 3);
    const json& b1 = rep.at("estimates")[0];
    CHECK(b1.at("estimate").get<double>() > 0.0);
    CHECK(b1.at("hits").get<int>() >= 1);
    CHECK(b1.at("region").at("lower")[0] == 10.0);
    CHECK(rep.at("label") == "SS2");
    CHECK(rep.at("n_star") == 50000);
  }
  const std::string first = slurp(t.path / "report.json");
  REQUIRE(run_cli(t.path,
                  "extrapolate --model model.json --exceedances exc.csv "
                  "--seed 3 --out report2.json")
              .exit_code == 0);
  CHECK(first == slurp(t.path / "report2.json"));

  // a region dipping below the threshold surface is rejected
  RunResult bad = run_cli(t.path,
                          "extrapolate --model model.json --exceedances "
                          "exc.csv --region '0:1;0:1' --out bad.json");
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("threshold surface") != std::string::npos);

  // diagnose: artifact files in the output directory
  RunResult dia = run_cli(t.path,
                          "diagnose --model model.json --exceedances exc.csv "
                          "--data raw.csv --n-star 10000 --out-dir diag");
  REQUIRE_MESSAGE(dia.exit_code == 0, dia.err);
  for (const char* f : {"ppqq.csv", "return_curve_50.csv",
                        "return_curve_100.csv", "limit_set.csv",
                        "summary.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(t.path / "diag" / f), "missing diag/", f);
  const json summary = parse_file(t.path / "diag" / "summary.json");
  CHECK(summary.at("pit_ks").get<double>() < 0.2);
  CHECK(summary.at("return_calibration").size() == 2);
}

TEST_CASE("validation failures exit nonzero with a clear message") {
  TempDir t("valid");
  REQUIRE(run_cli(t.path,
                  "simulate --distribution 1 --n 800 --seed 2 --out raw.csv")
              .exit_code == 0);
  REQUIRE(run_cli(t.path, "threshold --in raw.csv --out exc.csv").exit_code ==
          0);

  RunResult r = run_cli(
      t.path, "fit --exceedances exc.csv --mode angular --bounded --out m.json");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("angular") != std::string::npos);

  // missing upstream artifact
  CHECK(run_cli(t.path, "fit --exceedances nothere.csv --out m.json")
            .exit_code == 1);
  // raw margins rejected by threshold
  REQUIRE(run_cli(t.path, "transform --in raw.csv --q 0.9 --out t.csv")
              .exit_code == 0);
  CHECK(run_cli(t.path, "threshold --in raw.csv --margins raw --out e2.csv")
            .exit_code != 0);
}

TEST_CASE("config files merge under explicit flags") {
  TempDir t("config");
  {
    std::ofstream cfg(t.path / "cfg.json");
    cfg << R"({"n": 100, "seed": 4, "out": "c.csv", "distribution": 2})";
  }
  REQUIRE(run_cli(t.path, "simulate --config cfg.json --n 60").exit_code == 0);
  CHECK(count_lines(t.path / "c.csv") == 61);  // flag --n beats config n
  const json m = parse_file(t.path / "c.csv.manifest.json");
  CHECK(m.at("config").at("n") == 60);
  CHECK(m.at("config").at("seed") == 4);

  {
    std::ofstream cfg(t.path / "cfg_unknown.json");
    cfg << R"({"n": 100, "bogus_key": 1})";
  }
  RunResult r = run_cli(t.path, "simulate --config cfg_unknown.json");
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("bogus_key") != std::string::npos);

  {
    std::ofstream cfg(t.path / "cfg_bad.json");
    cfg << "{\n  \"n\": 100,\n  \"seed\": oops\n}";
  }
  r = run_cli(t.path, "simulate --config cfg_bad.json");
  CHECK(r.exit_code != 0);
  // parse errors carry file:line:column
  CHECK(r.err.find("cfg_bad.json:3:") != std::string::npos);
}

TEST_CASE("study artifacts are deterministic across worker counts") {
  TempDir t("study");
  const std::string base =
      "study --distribution 1 --pipeline SS2 --replications 4 --n 1200 "
      "--n-star 4000 --seed 5 --truth 2.3e-5,8.5e-7,2.1e-9 ";
  REQUIRE(run_cli(t.path, base + "--threads 1 --out-dir st1").exit_code == 0);
  REQUIRE(run_cli(t.path, base + "--threads 3 --out-dir st3").exit_code == 0);
  CHECK(slurp(t.path / "st1" / "estimates.csv") ==
        slurp(t.path / "st3" / "estimates.csv"));
  CHECK(count_lines(t.path / "st1" / "estimates.csv") == 1 + 4 * 3);

  const json s = parse_file(t.path / "st1" / "summary.json");
  REQUIRE(s.at("regions").size() == 3);
  CHECK(s.at("failed_replications") == 0);
  CHECK(s.at("regions")[0].contains("median_log_probability"));
  CHECK(s.at("regions")[0].at("truth") == 2.3e-5);
  CHECK(fs::exists(t.path / "st1" / "manifest.json"));
}

TEST_CASE("study SS4 emits one row per replication and region") {
  TempDir t("studyss4");
  RunResult r = run_cli(t.path,
                        "study --distribution 1 --pipeline SS4 "
                        "--replications 20 --n 800 --n-star 2000 --seed 3 "
                        "--out-dir st");
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  const fs::path est = t.path / "st" / "estimates.csv";
  CHECK(count_lines(est) == 1 + 20 * 3);
  std::ifstream in(est);
  std::string line;
  std::getline(in, line);
  CHECK(line == "replication,region,label,n_exc,probability,se,hits");
  int ss4_rows = 0;
  while (std::getline(in, line))
    if (line.find(",SS4,") != std::string::npos) ++ss4_rows;
  CHECK(ss4_rows == 60);
}

}  // TEST_SUITE
