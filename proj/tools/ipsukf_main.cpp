// ipsukf: experiment runner for the input-parameter-state UKF.
//
//   ipsukf list-presets
//   ipsukf preset <name> [--seed N] [--out DIR] [--print-config]
//   ipsukf run <config.json> [--seed N] [--out DIR]
//   ipsukf sweep <config.json | preset-name> --seeds 1,2,3 [--out DIR] [--threads N]
//
// Exit status: 0 converged, 2 not converged, 3 diverged, 64 config error.

#include "ipsukf/errors.hpp"
#include "ipsukf/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace {

fs::path output_root() {
  if (const char* env = std::getenv("IPSUKF_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

fs::path resolve_out(const std::string& flag, const ipsukf::ExperimentConfig& config,
                     const std::string& leaf) {
  if (!flag.empty()) return flag;
  if (!config.output_dir.empty()) return fs::path(config.output_dir) / leaf;
  return output_root() / config.name / leaf;
}

void print_summary(const ipsukf::ExperimentReport& rep, const fs::path& dir) {
  const auto& m = rep.metrics;
  fmt::print("{} seed={} status={} steps={} wall={:.2f}s\n", rep.config.name, rep.seed,
             ipsukf::to_string(rep.status), m.steps_completed, rep.wall_seconds);
  if (rep.run.diverged) fmt::print("  failure: {}\n", rep.run.failure);
  for (size_t j = 0; j < m.parameter_names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    fmt::print("  {:>4} true={:<8g} final={:<12.6g} rel.err={:.4f} std={:.4f}\n",
               m.parameter_names[j], m.true_parameters(i), m.final_parameters(i),
               m.parameter_mean_rel_error(i), m.parameter_std_rel_error(i));
  }
  fmt::print("  wrote {}\n", dir.string());
}

int run_one(const ipsukf::ExperimentConfig& config, std::optional<std::uint64_t> seed,
            const std::string& out_flag) {
  const std::uint64_t s = seed.value_or(config.seeds.front());
  const auto rep = ipsukf::run_experiment(config, s);
  const fs::path dir = resolve_out(out_flag, config, fmt::format("seed_{}", s));
  ipsukf::export_report(rep, dir);
  print_summary(rep, dir);
  return ipsukf::exit_code(rep.status);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw ipsukf::ConfigError("--seeds: empty entry");
    try {
      size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ipsukf::ConfigError(fmt::format("--seeds: '{}' is not a non-negative integer", item));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint input-parameter-state estimation with the unscented Kalman filter"};
  app.require_subcommand(1);

  auto* list_cmd = app.add_subcommand("list-presets", "List the built-in experiments");

  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool print_config = false;
  auto* preset_cmd = app.add_subcommand("preset", "Run a built-in experiment");
  preset_cmd->add_option("name", preset_name, "Preset name")->required();
  preset_cmd->add_option("--seed", seed, "Noise / excitation seed");
  preset_cmd->add_option("--out", out_dir, "Output directory");
  preset_cmd->add_flag("--print-config", print_config, "Print the preset as a config file and exit");

  std::string config_file;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment described by a config file");
  run_cmd->add_option("config", config_file, "Experiment config (JSON)")->required();
  run_cmd->add_option("--seed", seed, "Override the first config seed");
  run_cmd->add_option("--out", out_dir, "Output directory");

  std::string seeds_text;
  unsigned threads = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment over several seeds");
  sweep_cmd->add_option("config", config_file, "Experiment config (JSON) or preset name")->required();
  sweep_cmd->add_option("--seeds", seeds_text, "Comma-separated seeds (at least two)")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  sweep_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list_cmd->parsed()) {
      for (const auto& name : ipsukf::preset_names()) fmt::print("{}\n", name);
      return 0;
    }
    if (preset_cmd->parsed()) {
      const auto config = ipsukf::preset(preset_name);
      if (print_config) {
        std::cout << ipsukf::config_to_json(config);
        return 0;
      }
      return run_one(config, seed, out_dir);
    }
    if (run_cmd->parsed()) return run_one(ipsukf::load_config(config_file), seed, out_dir);
    if (sweep_cmd->parsed()) {
      const auto config = fs::exists(config_file) ? ipsukf::load_config(config_file)
                                                  : ipsukf::preset(config_file);
      const auto seeds = parse_seeds(seeds_text);
      const fs::path dir = resolve_out(out_dir, config, "sweep");
      const auto rep = ipsukf::sweep(config, seeds, threads, dir);
      fmt::print("{} over {} seeds: convergence rate {:.2f}, divergence rate {:.2f}\n", rep.name,
                 seeds.size(), rep.convergence_rate, rep.divergence_rate);
      for (size_t j = 0; j < rep.parameter_names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        fmt::print("  {:>4} median rel.err={:.4f} dispersion={:.4g}\n", rep.parameter_names[j],
                   rep.median_mean_rel_error(i), rep.final_dispersion(i));
      }
      fmt::print("  wrote {}\n", dir.string());
      return 0;
    }
  } catch (const ipsukf::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return ipsukf::kConfigErrorExit;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
