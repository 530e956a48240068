#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stochlab/error.hpp"
#include "stochlab/experiment.hpp"

using namespace stochlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "stochlab_experiment_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

std::vector<std::string> lines(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

/// Brownian preset shrunk to run in a second or two.
Json small_regularity() {
  return Json::parse(R"({
    "experiment": "brownian-regularity",
    "seed": 5,
    "noise": {"kind": "brownian", "horizon": 1.0, "steps": 32},
    "window": {"half_width": 1.0, "stride": 4},
    "realizations": 200,
    "pairs": {"count": 16, "lags": [0.5, 0.125, 0.25]},
    "cylinders": {"radii": [0.0625, 0.125, 0.25, 0.5], "count": 32},
    "conditions": {"k_min": 2, "k_max": 6, "beta": 0.5}
  })");
}

Json small_audit() {
  return Json::parse(R"({
    "experiment": "kernel-audit",
    "kernel": {"alpha": 2.0, "epsilon": 0.0, "dim": 1},
    "conditions": {"k_min": 3, "k_max": 7, "mass_points": 4}
  })");
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("STOCHLAB_CLI");
  REQUIRE(cli != nullptr);
  const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("strict config parsing") {
    CHECK(code_of([] { parse_config(Json::parse(R"({"seed": 1})")); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse_config(Json::parse(R"({"experiment": "nope"})")); }) ==
          ErrorCode::ConfigError);
    CHECK(code_of([] {
            parse_config(Json::parse(R"({"experiment": "kernel-audit", "colour": 1})"));
          }) == ErrorCode::ConfigError);
    CHECK(code_of([] {
            parse_config(Json::parse(R"({"experiment": "kernel-audit", "kernel": {"alpha": 2, "a": 1}})"));
          }) == ErrorCode::ConfigError);
    CHECK(code_of([] {
            parse_config(Json::parse(R"({"experiment": "kernel-audit", "p": "two"})"));
          }) == ErrorCode::ConfigError);
    const auto cfg = parse_config(Json::parse(R"({"experiment": "kernel-audit", "seed": 9})"));
    CHECK(cfg.seed == 9);
    CHECK(cfg.noise.seed == 9);
  }

  TEST_CASE("preset and noise must agree") {
    auto j = small_regularity();
    j["experiment"] = "poisson-regularity";
    const auto cfg = parse_config(j);
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    const auto r = run_experiment(cfg);
    CHECK(r.status == "invalid-config");
    CHECK(r.exit_code() == 2);
  }

  TEST_CASE("theta outside the embedding range fails in the embedding stage") {
    const auto cfg = parse_config(Json::parse(R"({"experiment": "embedding-check", "embedding": {"theta": 1.0}})"));
    const auto r = run_experiment(cfg);
    CHECK(r.status == "invalid-config");
    CHECK(r.failed_stage == "embedding");
    CHECK(r.exit_code() == 2);
    CHECK_FALSE(r.passed());

    const auto dir = scratch("theta");
    write_report(r, dir);
    CHECK(fs::exists(dir / "FAILED"));
    const auto files = emit_plot_data(r, dir);
    REQUIRE(files == std::vector<std::string>{"campanato_scales.csv"});
    CHECK(lines(dir / files[0]).size() == 1);  // header only
  }

  TEST_CASE("kernel audit writes the three condition series") {
    const auto r = run_experiment(parse_config(small_audit()));
    CHECK(r.status == "ok");
    CHECK(r.exit_code() == 0);
    REQUIRE(r.verdicts.size() == 3);
    for (const auto& v : r.verdicts) CHECK(v.pass);
    const auto dir = scratch("audit");
    const auto files = emit_plot_data(r, dir);
    REQUIRE(files.size() == 3);
    for (const auto& f : files) CHECK(fs::exists(dir / f));
    CHECK(lines(dir / "condition_increment.csv").size() == 1 + 5);
    CHECK(lines(dir / "condition_tail.csv").size() == 1 + 5);
    CHECK(lines(dir / "condition_mass.csv").size() == 1 + 4);
    CHECK_FALSE(fs::exists(dir / "FAILED"));
  }

  TEST_CASE("regularity preset: lag series, determinism and round trips") {
    const auto cfg = parse_config(small_regularity());
    const auto a = run_experiment(cfg);
    CHECK(a.status != "invalid-config");
    CHECK(a.failed_stage.empty());
    REQUIRE(a.verdicts.size() == 3);
    const auto b = run_experiment(cfg);
    CHECK(report_json(a).dump() == report_json(b).dump());

    const auto dir = scratch("regularity");
    emit_plot_data(a, dir);
    const auto rows = lines(dir / "lag_moment.csv");
    REQUIRE(rows.size() == 1 + 3);
    CHECK(rows[0].rfind("delta,estimate,lag,", 0) == 0);
    const std::vector<double> expected{0.5, 0.125, 0.25};
    for (int k = 0; k < 3; ++k) {
      std::istringstream row(rows[k + 1]);
      std::string cell;
      for (int c = 0; c < 3; ++c) std::getline(row, cell, ',');
      CHECK(std::stod(cell) == expected[k]);
    }
    CHECK(lines(dir / "campanato_scales.csv").size() == 1 + 4);

    const auto back = report_from_json(report_json(a));
    CHECK(report_json(back).dump() == report_json(a).dump());
    CHECK(back.exit_code() == a.exit_code());
    CHECK(to_json(parse_config(to_json(cfg))).dump() == to_json(cfg).dump());

    // Reports from different output directories are identical.
    auto moved = cfg;
    moved.output_dir = "elsewhere";
    CHECK(report_json(run_experiment(moved)).dump() == report_json(a).dump());
  }

  TEST_CASE("command line") {
    const auto dir = scratch("cli");
    const auto good = dir / "audit.json";
    std::ofstream(good) << small_audit().dump();
    CHECK(run_cli("run --config " + good.string() + " --out " + (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run" / "report.json"));
    CHECK(fs::exists(dir / "run" / "timing.json"));
    CHECK(run_cli("emit-plots --report " + (dir / "run" / "report.json").string() + " --out " +
                  (dir / "plots").string()) == 0);
    CHECK(fs::exists(dir / "plots" / "condition_mass.csv"));

    const auto bad = dir / "bad.json";
    std::ofstream(bad) << R"({"experiment": "kernel-audit", "bogus": true})";
    CHECK(run_cli("run --config " + bad.string() + " --out " + (dir / "bad").string()) == 2);

    const auto theta = dir / "theta.json";
    std::ofstream(theta) << R"({"experiment": "embedding-check", "embedding": {"theta": 1.0}})";
    CHECK(run_cli("run --config " + theta.string() + " --out " + (dir / "theta").string()) == 2);
    CHECK(fs::exists(dir / "theta" / "FAILED"));

    const auto reg = dir / "reg.json";
    std::ofstream(reg) << small_regularity().dump();
    CHECK(run_cli("simulate --config " + reg.string() + " --seed 77 --out " + (dir / "sim").string()) == 0);
    CHECK(fs::exists(dir / "sim" / "ensemble.bin"));
    CHECK(run_cli("moments --config " + reg.string() + " --out " + (dir / "sim").string()) == 0);
  }
}
