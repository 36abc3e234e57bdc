#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "codamed/cli.hpp"
#include "codamed/config_json.hpp"
#include "codamed/csv.hpp"
#include "codamed/io.hpp"
#include "codamed/simgen.hpp"
#include "test_util.hpp"

using namespace codamed;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("codamed_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run(std::initializer_list<const char*> argv, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::vector<const char*> args(argv);
  std::ostringstream out, err;
  const int code =
      cli::run_cli(static_cast<int>(args.size()), args.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

const char* kTaxonomyCsv =
    "part,b1,b2,b3,b4\n"
    "A,1,0,0,0\n"
    "B,-1,1,1,0\n"
    "C,-1,1,-1,0\n"
    "D,-1,-1,0,1\n"
    "E,-1,-1,0,-1\n";

}  // namespace

TEST_CASE("csv parser handles quotes, embedded commas and CRLF") {
  auto rows = csv::parse("a,b,c\r\n\"x,y\",\"he said \"\"hi\"\"\",3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b", "c"});
  CHECK(rows[1][0] == "x,y");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK_THROWS_AS(csv::parse("\"unterminated"), Error);
}

TEST_CASE("SBP CSV round trip") {
  auto file = io::parse_sbp_csv(kTaxonomyCsv);
  CHECK(file.sbp.parts() == 5);
  CHECK(file.balance_labels == std::vector<std::string>{"b1", "b2", "b3", "b4"});
  CHECK(file.sbp.part_labels[4] == "E");

  const std::string text = io::sbp_csv(file.sbp, file.balance_labels);
  auto again = io::parse_sbp_csv(text);
  CHECK(again.sbp.entries == file.sbp.entries);
  CHECK(again.sbp.part_labels == file.sbp.part_labels);

  CHECK_THROWS_AS(io::parse_sbp_csv("part,b1\nA,2\nB,-1\n"), Error);
}

TEST_CASE("cohort files round trip through write_cohort/read_cohort") {
  TempDir dir;
  auto data = testutil::random_cohort(4, 80, 555);
  std::vector<std::string> parts{"w", "x", "y", "z"};
  io::write_cohort(data, parts, dir.file("counts.csv"), dir.file("meta.csv"));
  auto back = io::read_cohort(dir.file("counts.csv"), dir.file("meta.csv"), parts);
  CHECK(back.counts == data.counts);
  CHECK(back.exposure == data.exposure);
  CHECK(back.stratum == data.stratum);
  CHECK((back.response - data.response).cwiseAbs().maxCoeff() < 1e-9);

  // part reordering by name
  std::vector<std::string> shuffled{"z", "w", "y", "x"};
  auto reordered = io::read_cohort(dir.file("counts.csv"), dir.file("meta.csv"), shuffled);
  CHECK(reordered.counts.col(0) == data.counts.col(3));
  CHECK(reordered.counts.col(1) == data.counts.col(0));

  CHECK_THROWS_AS(
      io::read_cohort(dir.file("counts.csv"), dir.file("meta.csv"), {"w", "x", "y", "nope"}),
      Error);
}

TEST_CASE("config JSON: presets, overrides and round trip") {
  auto cfg = config::config_from_json(R"({"preset": "scenario1", "alpha_s": "inf",
                                          "theta": 0.5, "n": 123, "seed": 9})");
  CHECK(std::isinf(cfg.alpha_s));
  CHECK(cfg.theta == 0.5);
  CHECK(cfg.n == 123);
  CHECK(cfg.base_props_x0[0] == 0.60);

  auto text = config::config_to_json(cfg);
  auto back = config::config_from_json(text);
  CHECK(back.n == cfg.n);
  CHECK(std::isinf(back.alpha_s));
  CHECK(back.sbp.entries == cfg.sbp.entries);
  CHECK((back.cie_targets - cfg.cie_targets).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(config::config_from_json("{"), Error);
  CHECK_THROWS_AS(config::config_from_json(R"({"preset": "scenario1", "alpha_s": "huge"})"),
                  Error);
}

TEST_CASE("plan JSON: cells, pooling and analysis contrast") {
  auto plan = config::plan_from_json(R"({
    "cells": [{"scenario": "scenario3", "alpha_s": 1, "theta": 0},
              {"scenario": "scenario1", "alpha_s": "inf", "theta": 0.1}],
    "replicates": 37, "n": 250, "master_seed": 11, "ci_level": 0.9,
    "calibration_reps": 2000, "pooling": "per_stratum",
    "analysis_sbp": "reversed_pivot", "threads": 2})");
  CHECK(plan.cells.size() == 2);
  CHECK(plan.cells[0].scenario == "scenario3");
  CHECK(std::isinf(plan.cells[1].alpha_s));
  CHECK(plan.replicates == 37);
  CHECK(plan.pooling == med::GammaPooling::per_stratum_product);
  CHECK(plan.analysis == expt::AnalysisSbp::reversed_pivot);

  auto round = config::plan_from_json(config::plan_to_json(plan));
  CHECK(round.cells.size() == 2);
  CHECK(round.analysis == expt::AnalysisSbp::reversed_pivot);

  CHECK_THROWS_AS(config::plan_from_json(R"({"cells": []})"), Error);
  CHECK_THROWS_AS(config::plan_from_json(R"({"cells": [{"scenario": "s"}],
                                             "pooling": "other"})"),
                  Error);
}

TEST_CASE("cli: sbp validate") {
  TempDir dir;
  io::write_text_file(dir.file("tax.csv"), kTaxonomyCsv);
  std::string out, err;
  CHECK(run({"codamed", "sbp", "validate", dir.file("tax.csv").c_str()}, &out, &err) == 0);
  CHECK(out == "valid: 5 parts, 4 balances\n");

  io::write_text_file(dir.file("bad.csv"), "part,b1,b2\nA,1,0\nB,-1,0\nC,-1,0\n");
  CHECK(run({"codamed", "sbp", "validate", dir.file("bad.csv").c_str()}, &out, &err) == 1);
  CHECK(err.find("EmptySide") != std::string::npos);

  CHECK(run({"codamed", "sbp", "validate"}, &out, &err) == 2);
  CHECK(run({"codamed", "nonsense"}, &out, &err) == 2);
}

TEST_CASE("cli: transform of uniform counts is all zero") {
  TempDir dir;
  io::write_text_file(dir.file("tax.csv"), kTaxonomyCsv);
  io::write_text_file(dir.file("counts.csv"),
                      "sample_id,A,B,C,D,E\ns1,7,7,7,7,7\ns2,3,3,3,3,3\n");
  std::string out;
  CHECK(run({"codamed", "transform", "--counts", dir.file("counts.csv").c_str(), "--sbp",
             dir.file("tax.csv").c_str()},
            &out) == 0);
  auto rows = csv::parse(out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"sample_id", "b1", "b2", "b3", "b4"});
  for (std::size_t r = 1; r < rows.size(); ++r)
    for (std::size_t c = 1; c < rows[r].size(); ++c)
      CHECK(std::abs(std::stod(rows[r][c])) < 1e-12);
}

TEST_CASE("cli: simulate then mediate recovers the calibrated truth") {
  TempDir dir;
  io::write_text_file(dir.file("config.json"), R"({
    "preset": "scenario1", "alpha_s": 30, "theta": 0,
    "n": 800, "seed": 31337, "mu": 2000})");
  std::string out, err;
  CHECK(run({"codamed", "simulate", "--config", dir.file("config.json").c_str(), "--out",
             dir.file("sim.csv").c_str(), "--calibration-reps", "20000", "--threads", "2"},
            &out, &err) == 0);
  CHECK(fs::exists(dir.file("sim.csv")));
  CHECK(fs::exists(dir.file("sim.meta.csv")));
  CHECK(err.find("calibrated beta_bar") != std::string::npos);

  io::write_text_file(dir.file("tax.csv"), kTaxonomyCsv);
  CHECK(run({"codamed", "mediate", "--counts", dir.file("sim.csv").c_str(), "--meta",
             dir.file("sim.meta.csv").c_str(), "--sbp", dir.file("tax.csv").c_str(),
             "--shared-gamma", "--out", dir.file("effects.csv").c_str()},
            &out, &err) == 0);
  auto rows = csv::parse(io::read_text_file(dir.file("effects.csv")));
  REQUIRE(rows.size() == 8);  // header + te,nde,oie + 4 cie
  CHECK(rows[0][0] == "effect");
  double oie = 0, oie_se = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r][0] == "oie") {
      oie = std::stod(rows[r][1]);
      oie_se = std::stod(rows[r][2]);
    }
  }
  // truth by construction: sum of the preset CIE targets
  CHECK(std::abs(oie - 0.10) < 3.5 * oie_se);

  // JSON output carries the same estimate
  CHECK(run({"codamed", "mediate", "--counts", dir.file("sim.csv").c_str(), "--meta",
             dir.file("sim.meta.csv").c_str(), "--sbp", dir.file("tax.csv").c_str(),
             "--shared-gamma", "--format", "json", "--out", dir.file("effects.json").c_str()},
            &out, &err) == 0);
  const std::string json_text = io::read_text_file(dir.file("effects.json"));
  CHECK(json_text.find("\"oie\"") != std::string::npos);
}

TEST_CASE("cli: experiment writes deterministic outputs") {
  TempDir dir;
  io::write_text_file(dir.file("plan.json"), R"({
    "cells": [{"scenario": "scenario1", "alpha_s": 50, "theta": 0}],
    "replicates": 10, "n": 250, "master_seed": 7, "calibration_reps": 2000})");
  std::string out, err;
  CHECK(run({"codamed", "experiment", "--plan", dir.file("plan.json").c_str(), "--out",
             dir.file("run1").c_str(), "--threads", "1"},
            &out, &err) == 0);
  CHECK(run({"codamed", "experiment", "--plan", dir.file("plan.json").c_str(), "--out",
             dir.file("run2").c_str(), "--threads", "2"},
            &out, &err) == 0);
  const std::string s1 = io::read_text_file(dir.file("run1") + "/summary.csv");
  const std::string s2 = io::read_text_file(dir.file("run2") + "/summary.csv");
  CHECK(s1 == s2);
  CHECK(s1.find("scenario1,50,0,OIE") != std::string::npos);
  CHECK(fs::exists(dir.file("run1") + "/diagnostics.csv"));

  CHECK(run({"codamed", "experiment", "--plan", dir.file("plan.json").c_str(), "--out",
             dir.file("run3").c_str(), "--threads", "2", "--dump-replicates"},
            &out, &err) == 0);
  const std::string dump = io::read_text_file(dir.file("run3") + "/replicates_cell0.csv");
  CHECK(dump.find("replicate,ok,te,te_se") == 0);

  // without --out the summary goes to stdout
  CHECK(run({"codamed", "experiment", "--plan", dir.file("plan.json").c_str(), "--threads",
             "2"},
            &out, &err) == 0);
  CHECK(out == s1);

  // seed override changes the output
  CHECK(run({"codamed", "experiment", "--plan", dir.file("plan.json").c_str(), "--seed", "8",
             "--threads", "2"},
            &out, &err) == 0);
  CHECK(out != s1);
}

TEST_CASE("shipped config files parse and validate") {
  const fs::path configs = fs::path(__FILE__).parent_path().parent_path() / "configs";
  auto sbp_file = io::read_sbp_csv((configs / "taxonomy_sbp.csv").string());
  CHECK(sbp_file.sbp.parts() == 5);
  CHECK(sbp_file.sbp.part_labels ==
        std::vector<std::string>{"A", "B", "C", "D", "E"});

  auto cfg = config::config_from_json(io::read_text_file((configs / "scenario1.json").string()));
  CHECK(cfg.n == 1000);
  CHECK(cfg.alpha_s == 1.0);
  CHECK(cfg.sbp.entries == sbp_file.sbp.entries);

  auto plan =
      config::plan_from_json(io::read_text_file((configs / "plan_scenario1.json").string()));
  CHECK(plan.cells.size() == 9);
  CHECK(plan.replicates == 200);
  CHECK(std::isinf(plan.cells[2].alpha_s));

  auto mis =
      config::plan_from_json(io::read_text_file((configs / "plan_misspecified.json").string()));
  CHECK(mis.analysis == expt::AnalysisSbp::reversed_pivot);
}

TEST_CASE("cli: missing files produce a machine-readable error") {
  std::string out, err;
  CHECK(run({"codamed", "sbp", "validate", "/nonexistent/x.csv"}, &out, &err) == 1)
  ;
  CHECK(err.find("\"error\"") != std::string::npos);
  CHECK(err.find("IoError") != std::string::npos);
}
