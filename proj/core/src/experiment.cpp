#include "ipsukf/experiment.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace ipsukf {

namespace {

void require_size(const Vector& v, Eigen::Index n, const std::string& field) {
  if (v.size() != n) {
    throw ConfigError(fmt::format("{}: expected {} entries, got {}", field, n, v.size()));
  }
}

void require_flags(const std::vector<bool>& f, int n, const std::string& field) {
  if (!f.empty() && static_cast<int>(f.size()) != n) {
    throw ConfigError(fmt::format("{}: expected {} flags, got {}", field, n, f.size()));
  }
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double x) { return !std::isfinite(x); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double stddev(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double x : values) {
    if (std::isfinite(x)) finite.push_back(x);
  }
  if (finite.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double x : finite) mean += x;
  mean /= static_cast<double>(finite.size());
  double sq = 0.0;
  for (double x : finite) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(finite.size() - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  const int n = model.n_dof();
  if (n < 1) throw ConfigError("model.masses: at least one DOF required");
  require_size(model.dampings, n, "model.dampings");
  require_size(model.stiffnesses, n, "model.stiffnesses");
  if (model.kind == ModelConfig::Kind::duffing_chain) {
    require_size(model.cubic, n, "model.cubic");
    require_flags(model.estimate_cubic, n, "model.estimate.cubic");
  }
  require_flags(model.estimate_damping, n, "model.estimate.damping");
  require_flags(model.estimate_stiffness, n, "model.estimate.stiffness");
  for (int i = 0; i < n; ++i) {
    if (!(model.masses(i) > 0.0)) {
      throw ConfigError(fmt::format("model.masses[{}]: must be positive", i));
    }
  }
  if (!layout.include_accelerations) {
    throw ConfigError("layout.accelerations: must be true (input recovery needs accelerations)");
  }
  excitation.validate(n);
  for (size_t i = 0; i < unknown_input_dofs.size(); ++i) {
    const int d = unknown_input_dofs[i];
    if (d < 0 || d >= n) {
      throw ConfigError(fmt::format("unknown_input_dofs[{}]: DOF {} outside 1..{}", i, d + 1, n));
    }
  }
  if (!(noise_rms_ratio >= 0.0)) throw ConfigError("noise.rms_ratio: must be >= 0");

  const ChainModel m = build_model();
  const int L = m.state_dim();
  const int obs = layout.dimension(n);
  require_size(filter.q_diag, L, "filter.q_diag");
  require_size(filter.r_diag, obs, "filter.r_diag");
  steps_in(filter.duration, filter.dt);
  if (!(filter.divergence_guard > 0.0)) throw ConfigError("filter.divergence_guard: must be > 0");
  if ((filter.r_diag.array() <= 0.0).any()) throw ConfigError("filter.r_diag: entries must be > 0");
  if ((filter.q_diag.array() < 0.0).any()) throw ConfigError("filter.q_diag: entries must be >= 0");
  try {
    filter_config().validate(L, obs);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("filter: {}", e.what()));
  }

  require_size(init.states, 2 * n, "init.states");
  require_size(init.parameters, m.n_params(), "init.parameters");
  require_size(init.p0_states, 2 * n, "init.p0_states");
  require_size(init.p0_parameters, m.n_params(), "init.p0_parameters");
  require_size(init.input, n, "init.input");
  if ((init.p0_states.array() < 0.0).any() || (init.p0_parameters.array() < 0.0).any()) {
    throw ConfigError("init: P0 diagonal entries must be >= 0");
  }
  if (!(metrics.window > 0.0)) throw ConfigError("metrics.window: must be > 0");
  if (metrics.window > filter.duration) {
    throw ConfigError("metrics.window: longer than filter.duration");
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
}

ChainProperties ExperimentConfig::truth() const {
  const auto n = model.masses.size();
  return {model.masses, model.dampings, model.stiffnesses,
          model.kind == ModelConfig::Kind::duffing_chain ? model.cubic : Vector::Zero(n)};
}

ChainModel ExperimentConfig::build_model() const {
  if (model.kind == ModelConfig::Kind::linear_chain) {
    return build_linear_chain({model.masses, model.dampings, model.stiffnesses,
                               model.estimate_damping, model.estimate_stiffness, layout});
  }
  return build_duffing_chain({model.masses, model.dampings, model.stiffnesses, model.cubic,
                              model.estimate_damping, model.estimate_stiffness,
                              model.estimate_cubic, layout});
}

FilterConfig ExperimentConfig::filter_config() const {
  FilterConfig c;
  c.alpha = filter.alpha;
  c.beta = filter.beta;
  c.kappa = filter.kappa;
  c.process_cov = filter.q_diag.asDiagonal();
  c.measurement_cov = filter.r_diag.asDiagonal();
  c.dt = filter.dt;
  return c;
}

std::vector<bool> ExperimentConfig::known_mask() const {
  std::vector<bool> mask(static_cast<size_t>(model.n_dof()), true);
  for (int d : unknown_input_dofs) mask[static_cast<size_t>(d)] = false;
  return mask;
}

RunInit ExperimentConfig::run_init() const {
  const int n = model.n_dof();
  const auto p = init.parameters.size();
  RunInit r;
  r.state.resize(2 * n + p);
  r.state << init.states, init.parameters;
  Vector diag(2 * n + p);
  diag << init.p0_states, init.p0_parameters;
  r.covariance = diag.asDiagonal();
  r.input = {init.input, known_mask(), Vector::Zero(n)};
  return r;
}

int exit_code(RunStatus status) { return static_cast<int>(status); }

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::converged: return "converged";
    case RunStatus::not_converged: return "not_converged";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

ExperimentReport run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  ExperimentReport rep;
  rep.config = config;
  rep.seed = seed;

  const ChainModel model = config.build_model();
  const int n = model.n_dof();
  rep.truth = rk4_simulate(config.truth(), config.excitation, Vector::Zero(2 * n),
                           config.filter.dt, config.filter.duration, seed);
  rep.measurements =
      synthesize_measurements(rep.truth, config.layout, {config.noise_rms_ratio, seed});

  const std::vector<Vector> y(rep.measurements.begin() + 1, rep.measurements.end());
  const FilterConfig fc = config.filter_config();
  RunInit init = config.run_init();
  init.input.known_values = rep.truth.inputs.front();

  if (config.filter.mode == FilterSettings::Mode::ips) {
    RunOptions opts;
    opts.step.divergence_guard = config.filter.divergence_guard;
    opts.known_values.assign(rep.truth.inputs.begin() + 1, rep.truth.inputs.end());
    rep.run = run(model, fc, y, init, opts);
  } else {
    rep.run = run_standard(model, fc, y, rep.truth.inputs, init,
                           {config.filter.divergence_guard});
  }

  std::vector<std::string> names;
  for (const auto& s : model.parameter_slots()) names.push_back(s.name());
  rep.metrics = compute_metrics(rep.run, rep.truth, model.nominal_parameters(), names,
                                config.unknown_input_dofs, config.metrics);
  rep.status = rep.run.diverged       ? RunStatus::diverged
               : rep.metrics.converged ? RunStatus::converged
                                       : RunStatus::not_converged;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

SweepReport sweep(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds,
                  unsigned threads, const std::optional<std::filesystem::path>& out_dir) {
  if (seeds.size() < 2) throw ConfigError("sweep needs at least two seeds");
  config.validate();

  const ChainModel model = config.build_model();
  SweepReport agg;
  agg.name = config.name;
  for (const auto& s : model.parameter_slots()) agg.parameter_names.push_back(s.name());
  agg.true_parameters = model.nominal_parameters();
  agg.outcomes.resize(seeds.size());

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < seeds.size(); i = next++) {
      SeedOutcome& out = agg.outcomes[i];
      out.seed = seeds[i];
      try {
        const ExperimentReport rep = run_experiment(config, seeds[i]);
        out.status = rep.status;
        out.final_parameters = rep.metrics.final_parameters;
        out.mean_rel_error = rep.metrics.parameter_mean_rel_error;
        if (out_dir) export_report(rep, *out_dir / fmt::format("seed_{}", seeds[i]));
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(seeds.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const auto p = agg.true_parameters.size();
  size_t converged = 0, diverged = 0;
  for (const auto& o : agg.outcomes) {
    converged += o.status == RunStatus::converged;
    diverged += o.status == RunStatus::diverged;
  }
  agg.convergence_rate = static_cast<double>(converged) / static_cast<double>(seeds.size());
  agg.divergence_rate = static_cast<double>(diverged) / static_cast<double>(seeds.size());
  agg.median_mean_rel_error.resize(p);
  agg.final_dispersion.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> errs, finals;
    for (const auto& o : agg.outcomes) {
      if (!o.status) continue;
      errs.push_back(o.mean_rel_error(j));
      finals.push_back(o.final_parameters(j));
    }
    agg.median_mean_rel_error(j) = median(errs);
    agg.final_dispersion(j) = stddev(finals);
  }
  if (out_dir) export_sweep(agg, *out_dir);
  return agg;
}

}  // namespace ipsukf
