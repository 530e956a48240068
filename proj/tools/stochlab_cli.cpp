// stochlab: run experiment presets and their individual stages.
#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "stochlab/error.hpp"
#include "stochlab/experiment.hpp"

namespace fs = std::filesystem;
using namespace stochlab;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "RNG seed (overrides the config and STOCHLAB_SEED)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--threads", c.threads, "OpenMP threads (0 keeps the runtime default)")
      ->check(CLI::NonNegativeNumber);
}

/// Seed precedence: --seed, then the config file, then STOCHLAB_SEED, then 1.
ExperimentConfig prepare(const Common& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
  std::ifstream in(c.config);
  require(in.good(), ErrorCode::IoError, "cannot open " + c.config);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, c.config + ": " + e.what());
  }
  if (!j.contains("seed"))
    if (const char* env = std::getenv("STOCHLAB_SEED")) {
      try {
        j["seed"] = std::stoull(env);
      } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, std::string("STOCHLAB_SEED is not an integer: ") + env);
      }
    }
  if (c.seed) j["seed"] = *c.seed;
  ExperimentConfig cfg = parse_config(j);
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create " + dir.string());
  return dir;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int audit_kernel(const Common& c) {
  const ExperimentConfig cfg = prepare(c);
  cfg.kernel.validate();
  cfg.condition_probe(cfg.kernel).validate();
  const Json j = condition_stage(cfg, cfg.kernel);
  const fs::path dir = out_dir(cfg);
  write_json(dir / "conditions.json", j);
  ExperimentReport r;
  r.config = to_json(cfg);
  r.config["experiment"] = "kernel-audit";
  r.modules["conditions"] = j;
  emit_plot_data(r, dir);
  const double pred = j["predicted_gamma"].get<double>();
  bool pass = true;
  for (const char* key : {"gamma1", "gamma2"}) {
    const double slope = j[key]["slope"].get<double>();
    const bool ok = std::abs(slope - pred) <= cfg.tolerances.exponent;
    std::cout << key << " = " << slope << " (predicted " << pred << ") " << (ok ? "ok" : "off")
              << '\n';
    pass = pass && ok;
  }
  return pass ? 0 : 1;
}

int simulate(const Common& c, const std::string& prefix) {
  ExperimentConfig cfg = prepare(c);
  cfg.noise.validate();
  cfg.g.validate();
  const FieldEnsemble ens = simulation_stage(cfg);
  const fs::path path = out_dir(cfg) / prefix;
  save_ensemble(ens, path);
  std::cout << "wrote " << path.string() << ".{bin,json}: " << ens.realizations << " x "
            << ens.steps() + 1 << " x " << ens.window_size() << '\n';
  return 0;
}

int moments(const Common& c, const std::string& ensemble, bool cylinders) {
  const ExperimentConfig cfg = prepare(c);
  const fs::path dir = out_dir(cfg);
  const FieldEnsemble ens = load_ensemble(ensemble.empty() ? dir / "ensemble" : fs::path(ensemble));
  const MomentField field = cylinders ? cylinder_moment_stage(cfg, ens) : moment_stage(cfg, ens);
  std::ofstream csv(dir / "moments.csv");
  write_moment_csv(csv, field);
  std::ofstream js(dir / "moments.json");
  write_moment_json(js, field);
  if (!cylinders) {
    const PowerFit fit = fit_moment_exponent(field);
    std::cout << "fitted exponent " << fit.slope << " +- " << fit.stderr << " over "
              << field.pairs.size() << " pairs\n";
  }
  return 0;
}

int seminorm(const Common& c, const std::string& moments_path) {
  const ExperimentConfig cfg = prepare(c);
  const fs::path dir = out_dir(cfg);
  SeminormReport rep;
  if (moments_path.empty()) {
    rep = embedding_stage(cfg);
  } else {
    std::ifstream in(moments_path);
    require(in.good(), ErrorCode::IoError, "cannot open " + moments_path);
    const MomentField field = read_moment_json(in);
    rep = campanato_seminorm(field, cfg.embedding.theta);
  }
  write_json(dir / "seminorm.json", to_json(rep));
  std::ofstream csv(dir / "seminorm.csv");
  write_seminorm_csv(csv, rep);
  std::cout << "sup " << rep.sup;
  if (rep.fitted) std::cout << ", fitted theta " << rep.fitted_exponent;
  std::cout << '\n';
  return 0;
}

int run(const Common& c) {
  const ExperimentConfig cfg = prepare(c);
  const ExperimentReport r = run_experiment(cfg);
  const fs::path dir = out_dir(cfg);
  write_report(r, dir);
  emit_plot_data(r, dir);
  for (const auto& v : r.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.claim << ": fitted " << v.fitted
              << ", predicted " << v.predicted << " +- " << v.tolerance << '\n';
  if (!r.failed_stage.empty())
    std::cerr << r.status << " in stage '" << r.failed_stage << "': " << r.error << '\n';
  return r.exit_code();
}

int emit_plots(const std::string& report_path, const std::string& out) {
  std::ifstream in(report_path);
  require(in.good(), ErrorCode::IoError, "cannot open " + report_path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, report_path + ": " + e.what());
  }
  const ExperimentReport r = report_from_json(j);
  const fs::path dir = out.empty() ? fs::path(report_path).parent_path() : fs::path(out);
  for (const auto& f : emit_plot_data(r, dir)) std::cout << (dir / f).string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic heat-equation regularity experiments"};
  app.require_subcommand(1);

  Common common;
  std::string prefix = "ensemble", ensemble, moments_path, report_path;
  bool cylinders = false;

  auto* audit = app.add_subcommand("audit-kernel", "evaluate and fit the kernel conditions");
  add_common(audit, common);
  auto* sim = app.add_subcommand("simulate", "simulate and save a field ensemble");
  add_common(sim, common);
  sim->add_option("--name", prefix, "file prefix inside the output directory");
  auto* mom = app.add_subcommand("moments", "pair moments from a saved ensemble");
  add_common(mom, common);
  mom->add_option("--ensemble", ensemble, "ensemble prefix (default <out>/ensemble)");
  mom->add_flag("--cylinders", cylinders, "sample within the configured cylinders");
  auto* semi = app.add_subcommand("seminorm", "Campanato seminorm scan");
  add_common(semi, common);
  semi->add_option("--moments", moments_path, "moments.json from `moments --cylinders`");
  auto* runc = app.add_subcommand("run", "run a full preset and write report.json");
  add_common(runc, common);
  auto* plots = app.add_subcommand("emit-plots", "write plot CSVs from a report.json");
  plots->add_option("--report", report_path, "report.json")->required()->check(CLI::ExistingFile);
  plots->add_option("--out", common.out, "output directory (default: next to the report)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*audit) return audit_kernel(common);
    if (*sim) return simulate(common, prefix);
    if (*mom) return moments(common, ensemble, cylinders);
    if (*semi) return seminorm(common, moments_path);
    if (*runc) return run(common);
    if (*plots) return emit_plots(report_path, common.out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
