#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stochlab/campanato.hpp"
#include "stochlab/convolution.hpp"
#include "stochlab/kernel_conditions.hpp"
#include "stochlab/moments.hpp"
#include "stochlab/serialization.hpp"

namespace stochlab {

enum class Preset {
  KernelAudit,
  BrownianRegularity,
  PoissonRegularity,
  FractionalSweep,
  EmbeddingCheck,
};

const char* preset_name(Preset preset) noexcept;
Preset preset_from_name(const std::string& name);

/// Condition audit settings: dyadic pairs (s, s + 2^-k), k in [k_min, k_max].
struct ConditionSettings {
  double s = 0.5;
  int k_min = 2;
  int k_max = 9;
  double beta = 0.0;
  std::optional<double> power;  ///< defaults to the experiment's p
  int mass_points = 6;          ///< s = horizon 2^-j, j < mass_points, for the mass slope
};

struct PairSettings {
  int count = 256;  ///< pairs per lag
  std::vector<double> lags{0.0625, 0.125, 0.25, 0.5};
  LagDirection direction = LagDirection::Alternate;
};

/// Stochastic Campanato scan on the simulated field (within-cylinder pairs).
struct CylinderSettings {
  std::vector<double> radii{0.0625, 0.125, 0.25, 0.5};
  std::vector<SpaceTimePoint> centers{{0.5, {0.0}}};
  int count = 256;
};

/// Deterministic field |x|^gamma + t^{gamma/2} scanned over a box domain.
struct EmbeddingSettings {
  double theta = 1.25;
  double gamma = 0.5;
  int dim = 1;
  DomainSpec domain;  ///< empty selects (0, 1) x (-1, 1)^d
  std::vector<double> radii{0.03125, 0.0625, 0.125, 0.25, 0.5};
  std::vector<SpaceTimePoint> centers;  ///< empty selects the origin
  int budget = 512;
};

struct Tolerances {
  double exponent = 0.15;
  double oracle = 0.05;
  double moment_sigma = 3.0;
};

struct ExperimentConfig {
  Preset experiment = Preset::KernelAudit;
  KernelSpec kernel;
  std::optional<SpectralGrid> grid;  ///< empty selects SpectralGrid::for_kernel(kernel, dt/2, T)
  NoiseSpec noise;
  TestFunctionSpec g;
  WindowSpec window;
  double p = 2.0;
  int realizations = 2000;
  PairSettings pairs;
  CylinderSettings cylinders;
  ConditionSettings conditions;
  std::vector<std::pair<double, double>> sweep;  ///< (alpha, epsilon)
  EmbeddingSettings embedding;
  Tolerances tolerances;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Checks every module spec plus preset compatibility.
  void validate() const;
  SpectralGrid resolved_grid() const;
  ConditionProbe condition_probe(const KernelSpec& kernel) const;
};

/// Preset defaults; parse_config overlays the file on these.
ExperimentConfig default_config(Preset preset);
/// Strict: unknown keys are ConfigError. Requires "experiment".
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
Json to_json(const ExperimentConfig& config);

struct Verdict {
  std::string claim;
  double predicted = 0.0;
  double fitted = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ExperimentReport {
  Json config;
  std::string status = "ok";  ///< ok | verdict-failed | invalid-config | numerical-failure | failed
  std::string failed_stage;
  std::string error;
  Json modules = Json::object();
  std::vector<Verdict> verdicts;
  Json timing = Json::object();  ///< kept out of report.json

  bool passed() const;
  /// 0 pass, 1 verdict fail, 2 config error, 3 numerical failure.
  int exit_code() const;
};

/// Runs the preset pipeline. Module errors are caught and recorded with their stage.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Deterministic report content (no timing).
Json report_json(const ExperimentReport& report);
ExperimentReport report_from_json(const Json& j);
/// report.json, timing.json, and a FAILED marker when the run did not complete.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Writes the plot CSVs for the report's preset; returns the file names.
std::vector<std::string> emit_plot_data(const ExperimentReport& report,
                                        const std::filesystem::path& dir);

// Individual stages, also used by the CLI subcommands.
Json condition_stage(const ExperimentConfig& config, const KernelSpec& kernel,
                     ConditionReport* out = nullptr);
FieldEnsemble simulation_stage(const ExperimentConfig& config);
MomentField moment_stage(const ExperimentConfig& config, const FieldEnsemble& ensemble);
MomentField cylinder_moment_stage(const ExperimentConfig& config, const FieldEnsemble& ensemble);
SeminormReport embedding_stage(const ExperimentConfig& config);

Json to_json(const PowerFit& fit);
Json to_json(const SeminormReport& report);

}  // namespace stochlab
