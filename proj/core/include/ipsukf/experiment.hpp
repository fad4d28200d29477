#pragma once

#include "ipsukf/analysis.hpp"
#include "ipsukf/chain_model.hpp"
#include "ipsukf/input_estimator.hpp"
#include "ipsukf/simulator.hpp"
#include "ipsukf/ukf.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ipsukf {

struct ModelConfig {
  enum class Kind { linear_chain, duffing_chain };

  Kind kind = Kind::linear_chain;
  Vector masses;
  Vector dampings;
  Vector stiffnesses;
  Vector cubic;  ///< duffing only
  std::vector<bool> estimate_damping;
  std::vector<bool> estimate_stiffness;
  std::vector<bool> estimate_cubic;

  int n_dof() const { return static_cast<int>(masses.size()); }
};

struct FilterSettings {
  enum class Mode { ips, standard };

  Mode mode = Mode::ips;
  double alpha = 1e-2;
  double beta = 2.0;
  double kappa = 0.0;
  Vector q_diag;  ///< length L
  Vector r_diag;  ///< length m
  double dt = 0.01;
  double duration = 30.0;
  double divergence_guard = 1e6;
};

struct InitSettings {
  Vector states;      ///< [x0 | xdot0] guess, length 2n
  Vector parameters;  ///< theta0 guess, length n_params
  Vector p0_states;   ///< diagonal of P0 for the dynamic states
  Vector p0_parameters;
  Vector input;  ///< u_0^e, length n
};

struct ExperimentConfig {
  std::string name;
  ModelConfig model;
  ExcitationSpec excitation;
  std::vector<int> unknown_input_dofs;  ///< zero-based; every other DOF has a known input
  ObservationLayout layout;
  double noise_rms_ratio = 0.05;
  FilterSettings filter;
  InitSettings init;
  MetricThresholds metrics;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  ChainModel build_model() const;
  ChainProperties truth() const;
  FilterConfig filter_config() const;
  RunInit run_init() const;
  std::vector<bool> known_mask() const;
};

/// Parses the JSON experiment format; errors carry the field path.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);
/// Canonical JSON (fixed key order) that parses back to the same config.
std::string config_to_json(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ExperimentConfig preset(std::string_view name);

enum class RunStatus { converged = 0, not_converged = 2, diverged = 3 };

/// Process exit status for each outcome; 64 is reserved for config errors.
int exit_code(RunStatus status);
constexpr int kConfigErrorExit = 64;
std::string_view to_string(RunStatus status);

struct ExperimentReport {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  Trajectory truth;
  std::vector<Vector> measurements;  ///< samples 0..N including the unused t = 0 row
  RunReport run;
  Metrics metrics;
  RunStatus status = RunStatus::not_converged;
  double wall_seconds = 0.0;
};

/// Truth by RK4, noisy measurements, filter run and metrics for one seed.
ExperimentReport run_experiment(const ExperimentConfig& config, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<RunStatus> status;  ///< empty if the run threw
  std::string error;
  Vector final_parameters;
  Vector mean_rel_error;
};

struct SweepReport {
  std::string name;
  std::vector<std::string> parameter_names;
  Vector true_parameters;
  std::vector<SeedOutcome> outcomes;
  double convergence_rate = 0.0;
  double divergence_rate = 0.0;
  Vector median_mean_rel_error;  ///< per parameter, over seeds that produced metrics
  Vector final_dispersion;       ///< per parameter, std of final estimates across seeds
};

/// Runs every seed (in parallel, up to `threads` workers; 0 = hardware
/// concurrency). Needs at least two seeds. When `out_dir` is set each seed
/// is exported to out_dir/seed_<s>/.
SweepReport sweep(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds,
                  unsigned threads = 0,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Column names of trace.csv for a config.
std::vector<std::string> trace_header(const ExperimentConfig& config);
std::string trace_csv(const ExperimentReport& report);
std::string truth_csv(const ExperimentReport& report);
std::string metrics_json(const ExperimentReport& report);
std::string sweep_json(const SweepReport& report);

/// Writes trace.csv, truth.csv, metrics.json and config.echo into `dir`.
void export_report(const ExperimentReport& report, const std::filesystem::path& dir);
void export_sweep(const SweepReport& report, const std::filesystem::path& dir);

}  // namespace ipsukf
