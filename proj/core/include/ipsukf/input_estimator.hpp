#pragma once

#include "ipsukf/system_model.hpp"
#include "ipsukf/ukf.hpp"

#include <string>
#include <vector>

namespace ipsukf {

/// One completed filter step.
struct StepResult {
  Vector state;
  Matrix covariance;
  InputFrame input_estimate;  ///< stage 2, after the measurement update; masked
  InputFrame stage1_input;    ///< from the predicted mean; masked
  long step_index = 0;
  double time = 0.0;
};

/// Input from measured accelerations and the state's displacements,
/// velocities and parameters: u = M xdd_m + C xd + K x (+ E cubic).
/// The mask of `pattern` is carried over but not applied.
InputFrame estimate_input(const Vector& accel_meas, const Vector& z, const SystemModel& model,
                          const InputFrame& pattern);

/// Rows [offset, offset + n_dof) of a measurement vector holding accelerations.
Vector measured_accelerations(const Vector& y_meas, const SystemModel& model);

struct StepOptions {
  double divergence_guard = 1e6;  ///< any |z_i| above this flags divergence
};

/// One step of the two-stage input-parameter-state filter.
///
/// Order: sigma points from `state`; prediction with the previous stage-2
/// input; stage-1 input from the predicted mean and the measured
/// accelerations (masked); measurement images with that input; update;
/// stage-2 input from the updated mean (masked). `state` is overwritten
/// with the posterior. The mask and known values of `prev_input` are the
/// ones enforced on both stages of this step.
StepResult ips_step(FilterState& state, const Vector& y_meas, const SystemModel& model,
                    const InputFrame& prev_input, const FilterConfig& config, long step_index,
                    const StepOptions& options = {});

struct RunInit {
  Vector state;
  Matrix covariance;
  InputFrame input;  ///< u_0^e with the known-row mask
};

/// Sequence of step results, truncated at the step that failed.
struct RunReport {
  std::vector<StepResult> steps;
  bool diverged = false;
  long failed_step = -1;
  std::string failure;
};

struct RunOptions {
  StepOptions step;
  /// Optional per-step known input values (row k-1 for step k); when empty the
  /// known values of the initial frame hold for the whole run.
  std::vector<Vector> known_values;
};

/// Runs ips_step over measurements y_1..y_N (step k consumes measurements[k-1]).
RunReport run(const SystemModel& model, const FilterConfig& config,
              const std::vector<Vector>& measurements, const RunInit& init,
              const RunOptions& options = {});

/// Same loop with the standard joint parameter-state filter and a fully
/// known input sequence; inputs[k] is u_k for k = 0..N.
RunReport run_standard(const SystemModel& model, const FilterConfig& config,
                       const std::vector<Vector>& measurements, const std::vector<Vector>& inputs,
                       const RunInit& init, const StepOptions& options = {});

}  // namespace ipsukf
