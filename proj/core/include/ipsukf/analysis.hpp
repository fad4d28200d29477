#pragma once

#include "ipsukf/chain_model.hpp"
#include "ipsukf/input_estimator.hpp"
#include "ipsukf/simulator.hpp"

#include <string>
#include <vector>

namespace ipsukf {

/// Erroneous damping, stiffness and input parts. The input error is
/// delta_u(t_k) = signal[k] + velocity_gain * xdot(t) + displacement_gain * x(t);
/// the gain terms let a perturbation track the response it perturbs (e.g.
/// delta_u = 0.1 xdot). Empty members count as zero.
struct PerturbationSpec {
  Matrix delta_C;
  Matrix delta_K;
  std::vector<Vector> delta_u_signal;
  Matrix delta_u_velocity_gain;
  Matrix delta_u_displacement_gain;

  void validate(int n_dof, long n_samples) const;
  /// delta_u at sample k for the given state.
  Vector delta_u(long k, const Vector& x, const Vector& v) const;
};

/// u_bar(t_k) = u_k + (delta_u_k - delta_C xdot_k - delta_K x_k) on the trajectory grid.
std::vector<Vector> equivalent_input(const Trajectory& traj, const PerturbationSpec& pert);

/// Per-sample balance (delta_u - delta_C xdot - delta_K x) - (u_bar - u); the
/// algebraic identity behind the equivalent input.
std::vector<double> equivalence_residual(const Trajectory& traj, const PerturbationSpec& pert,
                                         const std::vector<Vector>& u_bar);

struct EquivalenceReport {
  double max_state_deviation = 0.0;  ///< perturbed re-simulation vs original
  double max_residual = 0.0;         ///< max |equivalence_residual|
  double known_row_violation = 0.0;  ///< max |u_bar - u| over known-input rows
  std::vector<Vector> equivalent_input;
};

/// Re-simulates (C + dC, K + dK) driven by u + delta_u and compares it with
/// the original trajectory. For each DOF flagged in `known_mask`, reports how
/// far the equivalent input moves away from the known value.
EquivalenceReport verify_equivalence(const StructuralMatrices& truth, const PerturbationSpec& pert,
                                     const Trajectory& traj,
                                     const std::vector<bool>& known_mask = {});

struct MetricThresholds {
  double window = 3.0;           ///< trailing window [s]
  double mean_rel_error = 0.10;  ///< convergence: mean relative error below this
  double std_rel_error = 0.05;   ///< convergence: std of relative error below this
};

struct Metrics {
  std::vector<std::string> parameter_names;
  Vector true_parameters;
  Vector final_parameters;         ///< trailing-window mean of the estimates
  Vector parameter_mean_rel_error;  ///< trailing-window mean of |theta_hat - theta| / |theta|
  Vector parameter_std_rel_error;   ///< trailing-window std of (theta_hat - theta) / |theta|
  Vector convergence_time;          ///< first time after which rel. error stays below threshold; NaN if never
  std::vector<int> unknown_input_dofs;
  Vector input_rmse;  ///< per unknown DOF, stage-2 estimate vs truth, trailing window
  Vector state_rmse;  ///< per state channel [x | xdot], trailing window
  double window = 0.0;
  long steps_completed = 0;
  bool diverged = false;
  bool converged = false;
};

/// Trailing-window error metrics. step k of the report aligns with truth
/// sample k. Throws ConfigError if the window is longer than a completed run.
Metrics compute_metrics(const RunReport& report, const Trajectory& truth,
                        const Vector& true_params, const std::vector<std::string>& names,
                        const std::vector<int>& unknown_input_dofs,
                        const MetricThresholds& thresholds = {});

}  // namespace ipsukf
