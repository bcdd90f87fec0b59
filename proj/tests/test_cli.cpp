#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "emloc/experiments.hpp"

using namespace emloc;
namespace fs = std::filesystem;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = "/tmp/emloc_cli_" + name;
  fs::remove_all(dir);
  return dir;
}
}  // namespace

TEST_CASE("minimal config picks up the baseline defaults") {
  const auto cfg = parse_experiment_config_text(R"({"experiment":"locate"})");
  CHECK(cfg.bs.size() == 64);
  CHECK(cfg.link == LinkKind::Direct);
  CHECK(cfg.noise_dbm == -87.0);
  CHECK(cfg.t == 10);
  CHECK(cfg.p_beta == 0.01);
  CHECK(cfg.source_positions.size() == 1);
  CHECK(cfg.source_positions[0].x() == -2.0);
  CHECK(cfg.grid_nx == 15);
  bool noise_notice = false, source_notice = false;
  for (const auto& n : cfg.notices) {
    if (n.find("noise_dbm defaulted") != std::string::npos) noise_notice = true;
    if (n.find("sources defaulted") != std::string::npos) source_notice = true;
  }
  CHECK(noise_notice);
  CHECK(source_notice);
}

TEST_CASE("ris defaults") {
  const auto cfg = parse_experiment_config_text(
      R"({"experiment":"q-map","link":"ris","ris":{},"trials":1})");
  CHECK(cfg.noise_dbm == -120.0);
  REQUIRE(cfg.ris.has_value());
  CHECK(cfg.ris->size() == 100);
  CHECK(cfg.ris->origin.x() == 1.0);
  CHECK(cfg.source_positions[0].z() == 6.61);
}

TEST_CASE("config validation errors") {
  // RIS experiment without a RIS layout
  CHECK_THROWS_WITH_AS(parse_experiment_config_text(R"({"experiment":"q-map","link":"ris"})"),
                       doctest::Contains("needs a 'ris' layout"), std::invalid_argument);
  // conflicting snapshot counts
  CHECK_THROWS_WITH_AS(parse_experiment_config_text(
                           R"({"experiment":"locate","t_snapshots":10,"t1_snapshots":5})"),
                       doctest::Contains("conflicts"), std::invalid_argument);
  // unknown field diagnostics
  CHECK_THROWS_WITH_AS(parse_experiment_config_text(R"({"experiment":"locate","nois_dbm":-87})"),
                       doctest::Contains("unknown field 'nois_dbm'"), std::invalid_argument);
  // unknown experiment
  CHECK_THROWS_AS(parse_experiment_config_text(R"({"experiment":"frobnicate"})"),
                  std::invalid_argument);
  // malformed JSON points at the parse failure
  CHECK_THROWS_WITH_AS(parse_experiment_config_text("{"), doctest::Contains("invalid JSON"),
                       std::invalid_argument);
  // wrong type
  CHECK_THROWS_WITH_AS(parse_experiment_config_text(R"({"experiment":"locate","trials":"ten"})"),
                       doctest::Contains("wrong type"), std::invalid_argument);
  // RIS link demands MC-corrected manifolds
  CHECK_THROWS_WITH_AS(
      parse_experiment_config_text(
          R"({"experiment":"locate","link":"ris","ris":{},"mm_kinds":["nf"]})"),
      doctest::Contains("MC-corrected"), std::invalid_argument);
}

TEST_CASE("lr-dist experiment writes reproducible, verifiable outputs") {
  auto cfg = parse_experiment_config_text(
      R"({"experiment":"lr-dist","ref_draws":2000,"lr_dist_t_list":[5,10]})");
  const std::string dir1 = fresh_dir("lrdist1");
  const std::string dir2 = fresh_dir("lrdist2");
  REQUIRE(run_experiment(cfg, dir1) == 0);
  REQUIRE(run_experiment(cfg, dir2) == 0);

  CHECK(slurp(dir1 + "/rows.csv") == slurp(dir2 + "/rows.csv"));
  CHECK(slurp(dir1 + "/aggregates.json") == slurp(dir2 + "/aggregates.json"));

  std::string report;
  CHECK(verify_out_dir(dir1, &report) == 0);

  const std::string agg = slurp(dir1 + "/aggregates.json");
  CHECK(agg.find("\"t=5\"") != std::string::npos);
  CHECK(agg.find("\"t=10\"") != std::string::npos);
  CHECK(agg.find("beta") != std::string::npos);
}

TEST_CASE("locate experiment end-to-end at a tiny scale") {
  auto cfg = parse_experiment_config_text(R"({
    "experiment": "locate",
    "trials": 3,
    "ref_draws": 1500,
    "power_dbm_list": [10.0],
    "grid": {"nx": 9, "nz": 9},
    "refine": {"enabled": false},
    "bs": {"nh": 8, "nv": 8}
  })");
  const std::string dir = fresh_dir("locate");
  REQUIRE(run_experiment(cfg, dir) == 0);

  const std::string rows = slurp(dir + "/rows.csv");
  CHECK(rows.find("mm,g_dbm,trial,seed,m_hat") == 0);
  // three trial rows beyond the header
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 4);

  std::string report;
  CHECK(verify_out_dir(dir, &report) == 0);

  const std::string agg = slurp(dir + "/aggregates.json");
  CHECK(agg.find("rmse_x_m") != std::string::npos);
  CHECK(agg.find("tm_crb/g=10") != std::string::npos);

  // determinism across runs
  const std::string dir2 = fresh_dir("locate2");
  REQUIRE(run_experiment(cfg, dir2) == 0);
  CHECK(slurp(dir + "/rows.csv") == slurp(dir2 + "/rows.csv"));
}

TEST_CASE("zero trials produce a header-only CSV") {
  auto cfg = parse_experiment_config_text(R"({
    "experiment": "locate", "trials": 0, "ref_draws": 1200,
    "grid": {"nx": 5, "nz": 5}
  })");
  const std::string dir = fresh_dir("empty");
  REQUIRE(run_experiment(cfg, dir) == 0);
  const std::string rows = slurp(dir + "/rows.csv");
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 1);
  CHECK(rows.find("mm,g_dbm") == 0);
}

TEST_CASE("verify detects tampered aggregates") {
  auto cfg = parse_experiment_config_text(
      R"({"experiment":"lr-dist","ref_draws":1000,"lr_dist_t_list":[10]})");
  const std::string dir = fresh_dir("tamper");
  REQUIRE(run_experiment(cfg, dir) == 0);
  std::string agg = slurp(dir + "/aggregates.json");
  const auto pos = agg.find("\"mean\": 0.4");
  if (pos != std::string::npos) agg.replace(pos, 12, "\"mean\": 0.9");
  else {
    const auto p2 = agg.find("\"mean\":");
    REQUIRE(p2 != std::string::npos);
    agg.insert(p2 + 8, "9");
  }
  std::ofstream(dir + "/aggregates.json") << agg;
  std::string report;
  CHECK(verify_out_dir(dir, &report) != 0);
  CHECK(report.find("mismatch") != std::string::npos);
}

TEST_CASE("workers produce identical rows") {
  auto cfg = parse_experiment_config_text(R"({
    "experiment": "locate", "trials": 4, "ref_draws": 1200,
    "grid": {"nx": 7, "nz": 7}, "refine": {"enabled": false},
    "power_dbm_list": [0.0]
  })");
  const std::string dir1 = fresh_dir("w1");
  const std::string dir2 = fresh_dir("w2");
  REQUIRE(run_experiment(cfg, dir1) == 0);
  cfg.workers = 3;
  REQUIRE(run_experiment(cfg, dir2) == 0);
  CHECK(slurp(dir1 + "/rows.csv") == slurp(dir2 + "/rows.csv"));
}
