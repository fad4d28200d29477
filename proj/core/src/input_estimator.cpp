#include "ipsukf/input_estimator.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

namespace ipsukf {

namespace {

void check_guard(const Vector& z, double guard, long step) {
  if (!z.allFinite()) {
    throw DivergenceError(fmt::format("non-finite state at step {}", step), step);
  }
  const double peak = z.cwiseAbs().maxCoeff();
  if (peak > guard) {
    throw DivergenceError(
        fmt::format("state magnitude {:.3e} exceeds guard {:.3e} at step {}", peak, guard, step),
        step);
  }
}

StepResult make_result(const FilterState& state, InputFrame stage1, InputFrame stage2,
                       long step, double dt) {
  StepResult r;
  r.state = state.mean;
  r.covariance = state.cov;
  r.stage1_input = std::move(stage1);
  r.input_estimate = std::move(stage2);
  r.step_index = step;
  r.time = static_cast<double>(step) * dt;
  return r;
}

}  // namespace

Vector measured_accelerations(const Vector& y_meas, const SystemModel& model) {
  const int n = model.n_dof();
  const int offset = model.observation_layout().acceleration_offset(n);
  if (offset < 0) {
    throw ConfigError("observation layout has no acceleration rows; input recovery impossible");
  }
  if (y_meas.size() != model.observation_dim()) {
    throw ConfigError(fmt::format("measurement has {} entries, layout {} needs {}", y_meas.size(),
                                  model.observation_layout().name(), model.observation_dim()));
  }
  return y_meas.segment(offset, n);
}

InputFrame estimate_input(const Vector& accel_meas, const Vector& z, const SystemModel& model,
                          const InputFrame& pattern) {
  if (accel_meas.size() != model.n_dof()) {
    throw ConfigError(fmt::format("acceleration vector has {} rows, model has {} DOFs",
                                  accel_meas.size(), model.n_dof()));
  }
  InputFrame out = pattern;
  out.values = model.recover_input(accel_meas, z);
  if (!out.values.allFinite()) {
    throw DivergenceError("non-finite recovered input", -1);
  }
  return out;
}

StepResult ips_step(FilterState& state, const Vector& y_meas, const SystemModel& model,
                    const InputFrame& prev_input, const FilterConfig& config, long step_index,
                    const StepOptions& options) {
  const Vector accel = measured_accelerations(y_meas, model);

  const SigmaSet sigma = generate_sigma_points(state.mean, state.cov, config);
  const Prediction pred = predict(sigma, model, prev_input.values, config, step_index);

  InputFrame stage1;
  try {
    stage1 = apply_known_mask(estimate_input(accel, pred.mean, model, prev_input));
  } catch (const DivergenceError&) {
    throw DivergenceError(fmt::format("non-finite stage-1 input at step {}", step_index),
                          step_index);
  }

  Posterior post = update(pred.mean, pred.cov, pred.propagated, y_meas, model, stage1.values,
                          config, step_index);
  check_guard(post.mean, options.divergence_guard, step_index);

  InputFrame stage2;
  try {
    stage2 = apply_known_mask(estimate_input(accel, post.mean, model, prev_input));
  } catch (const DivergenceError&) {
    throw DivergenceError(fmt::format("non-finite stage-2 input at step {}", step_index),
                          step_index);
  }

  state.mean = std::move(post.mean);
  state.cov = std::move(post.cov);
  return make_result(state, std::move(stage1), std::move(stage2), step_index, config.dt);
}

RunReport run(const SystemModel& model, const FilterConfig& config,
              const std::vector<Vector>& measurements, const RunInit& init,
              const RunOptions& options) {
  if (measurements.empty()) throw ConfigError("measurement sequence is empty");
  config.validate(model.state_dim(), model.observation_dim());
  if (init.state.size() != model.state_dim()) {
    throw ConfigError(fmt::format("initial state has {} entries, model needs {}",
                                  init.state.size(), model.state_dim()));
  }
  if (init.input.size() != model.n_dof() || !init.input.consistent()) {
    throw ConfigError("initial input frame does not match the model DOF count");
  }
  if (!options.known_values.empty() && options.known_values.size() < measurements.size()) {
    throw ConfigError("known input sequence shorter than the measurement sequence");
  }

  RunReport report;
  report.steps.reserve(measurements.size());
  FilterState state{init.state, init.covariance};
  InputFrame prev = apply_known_mask(init.input);

  for (size_t i = 0; i < measurements.size(); ++i) {
    const long k = static_cast<long>(i) + 1;
    if (!options.known_values.empty()) prev.known_values = options.known_values[i];
    try {
      StepResult r = ips_step(state, measurements[i], model, prev, config, k, options.step);
      prev = r.input_estimate;
      report.steps.push_back(std::move(r));
    } catch (const DivergenceError& e) {
      report.diverged = true;
      report.failed_step = k;
      report.failure = e.what();
      break;
    } catch (const NumericalError& e) {
      report.diverged = true;
      report.failed_step = k;
      report.failure = e.what();
      break;
    }
  }
  return report;
}

RunReport run_standard(const SystemModel& model, const FilterConfig& config,
                       const std::vector<Vector>& measurements, const std::vector<Vector>& inputs,
                       const RunInit& init, const StepOptions& options) {
  if (measurements.empty()) throw ConfigError("measurement sequence is empty");
  if (inputs.size() != measurements.size() + 1) {
    throw ConfigError(fmt::format("need {} inputs (u_0..u_N), got {}", measurements.size() + 1,
                                  inputs.size()));
  }
  config.validate(model.state_dim(), model.observation_dim());

  RunReport report;
  report.steps.reserve(measurements.size());
  FilterState state{init.state, init.covariance};
  for (size_t i = 0; i < measurements.size(); ++i) {
    const long k = static_cast<long>(i) + 1;
    try {
      state = standard_step(state, measurements[i], model, inputs[i], inputs[i + 1], config, k);
      check_guard(state.mean, options.divergence_guard, k);
      InputFrame used = InputFrame::known(inputs[i + 1]);
      report.steps.push_back(make_result(state, used, used, k, config.dt));
    } catch (const DivergenceError& e) {
      report.diverged = true;
      report.failed_step = k;
      report.failure = e.what();
      break;
    } catch (const NumericalError& e) {
      report.diverged = true;
      report.failed_step = k;
      report.failure = e.what();
      break;
    }
  }
  return report;
}

}  // namespace ipsukf
