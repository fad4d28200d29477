#include "ipsukf/analysis.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace ipsukf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool present(const Matrix& m) { return m.size() > 0; }

void check_square(const Matrix& m, int n, const char* what) {
  if (present(m) && (m.rows() != n || m.cols() != n)) {
    throw ConfigError(fmt::format("{} is {}x{}, expected {}x{}", what, m.rows(), m.cols(), n, n));
  }
}

}  // namespace

void PerturbationSpec::validate(int n_dof, long n_samples) const {
  check_square(delta_C, n_dof, "delta_C");
  check_square(delta_K, n_dof, "delta_K");
  check_square(delta_u_velocity_gain, n_dof, "delta_u velocity gain");
  check_square(delta_u_displacement_gain, n_dof, "delta_u displacement gain");
  if (!delta_u_signal.empty()) {
    if (static_cast<long>(delta_u_signal.size()) != n_samples) {
      throw ConfigError(fmt::format("delta_u signal has {} samples, trajectory has {}",
                                    delta_u_signal.size(), n_samples));
    }
    for (const auto& s : delta_u_signal) {
      if (s.size() != n_dof) throw ConfigError("delta_u signal row size mismatch");
    }
  }
}

Vector PerturbationSpec::delta_u(long k, const Vector& x, const Vector& v) const {
  Vector out = delta_u_signal.empty() ? Vector::Zero(x.size()) : delta_u_signal[size_t(k)];
  if (present(delta_u_velocity_gain)) out += delta_u_velocity_gain * v;
  if (present(delta_u_displacement_gain)) out += delta_u_displacement_gain * x;
  return out;
}

std::vector<Vector> equivalent_input(const Trajectory& traj, const PerturbationSpec& pert) {
  pert.validate(traj.n_dof(), traj.size());
  std::vector<Vector> out;
  out.reserve(size_t(traj.size()));
  for (long k = 0; k < traj.size(); ++k) {
    const Vector x = traj.displacement(k);
    const Vector v = traj.velocity(k);
    Vector shift = pert.delta_u(k, x, v);
    if (present(pert.delta_C)) shift -= pert.delta_C * v;
    if (present(pert.delta_K)) shift -= pert.delta_K * x;
    out.push_back(traj.inputs[size_t(k)] + shift);
  }
  return out;
}

std::vector<double> equivalence_residual(const Trajectory& traj, const PerturbationSpec& pert,
                                         const std::vector<Vector>& u_bar) {
  pert.validate(traj.n_dof(), traj.size());
  if (static_cast<long>(u_bar.size()) != traj.size()) {
    throw ConfigError("equivalent input length does not match the trajectory");
  }
  std::vector<double> out;
  out.reserve(u_bar.size());
  for (long k = 0; k < traj.size(); ++k) {
    const Vector x = traj.displacement(k);
    const Vector v = traj.velocity(k);
    Vector shift = pert.delta_u(k, x, v);
    if (present(pert.delta_C)) shift -= pert.delta_C * v;
    if (present(pert.delta_K)) shift -= pert.delta_K * x;
    out.push_back((shift - (u_bar[size_t(k)] - traj.inputs[size_t(k)])).cwiseAbs().maxCoeff());
  }
  return out;
}

EquivalenceReport verify_equivalence(const StructuralMatrices& truth, const PerturbationSpec& pert,
                                     const Trajectory& traj, const std::vector<bool>& known_mask) {
  const int n = truth.n_dof();
  if (traj.n_dof() != n) throw ConfigError("trajectory and system DOF counts differ");
  if (!known_mask.empty() && static_cast<int>(known_mask.size()) != n) {
    throw ConfigError("known mask length does not match the DOF count");
  }
  pert.validate(n, traj.size());

  EquivalenceReport rep;
  rep.equivalent_input = equivalent_input(traj, pert);
  for (double r : equivalence_residual(traj, pert, rep.equivalent_input)) {
    rep.max_residual = std::max(rep.max_residual, r);
  }
  for (long k = 0; k < traj.size(); ++k) {
    for (int i = 0; i < static_cast<int>(known_mask.size()); ++i) {
      if (!known_mask[size_t(i)]) continue;
      rep.known_row_violation =
          std::max(rep.known_row_violation,
                   std::abs(rep.equivalent_input[size_t(k)](i) - traj.inputs[size_t(k)](i)));
    }
  }

  StructuralMatrices perturbed = truth;
  if (present(pert.delta_C)) perturbed.damping += pert.delta_C;
  if (present(pert.delta_K)) perturbed.stiffness += pert.delta_K;

  std::vector<Vector> drive = traj.inputs;
  if (!pert.delta_u_signal.empty()) {
    for (size_t k = 0; k < drive.size(); ++k) drive[k] += pert.delta_u_signal[k];
  }
  ForceFeedback feedback;
  if (present(pert.delta_u_velocity_gain) || present(pert.delta_u_displacement_gain)) {
    feedback = [&pert, n](const Vector& x, const Vector& v) {
      Vector f = Vector::Zero(n);
      if (present(pert.delta_u_velocity_gain)) f += pert.delta_u_velocity_gain * v;
      if (present(pert.delta_u_displacement_gain)) f += pert.delta_u_displacement_gain * x;
      return f;
    };
  }
  const Trajectory again =
      integrate_rk4(perturbed, drive, traj.displacement(0), traj.velocity(0), traj.dt(), feedback);
  for (long k = 0; k < traj.size(); ++k) {
    rep.max_state_deviation =
        std::max(rep.max_state_deviation,
                 (again.states[size_t(k)] - traj.states[size_t(k)]).cwiseAbs().maxCoeff());
  }
  return rep;
}

Metrics compute_metrics(const RunReport& report, const Trajectory& truth,
                        const Vector& true_params, const std::vector<std::string>& names,
                        const std::vector<int>& unknown_input_dofs,
                        const MetricThresholds& thresholds) {
  const long completed = static_cast<long>(report.steps.size());
  const double dt = truth.dt();
  if (!(dt > 0.0)) throw ConfigError("truth trajectory needs at least two samples");
  if (static_cast<Eigen::Index>(names.size()) != true_params.size()) {
    throw ConfigError("parameter names and true values differ in length");
  }
  long window_steps = std::lround(thresholds.window / dt);
  if (window_steps < 1) throw ConfigError("metric window must cover at least one step");
  if (window_steps > completed) {
    if (!report.diverged) {
      throw ConfigError(fmt::format("metric window {} s is longer than the run ({} steps)",
                                    thresholds.window, completed));
    }
    window_steps = completed;
  }

  Metrics m;
  m.parameter_names = names;
  m.true_parameters = true_params;
  m.unknown_input_dofs = unknown_input_dofs;
  m.window = static_cast<double>(window_steps) * dt;
  m.steps_completed = completed;
  m.diverged = report.diverged;

  const auto p = true_params.size();
  const int n = truth.n_dof();
  m.final_parameters = Vector::Constant(p, kNaN);
  m.parameter_mean_rel_error = Vector::Constant(p, kNaN);
  m.parameter_std_rel_error = Vector::Constant(p, kNaN);
  m.convergence_time = Vector::Constant(p, kNaN);
  m.input_rmse = Vector::Constant(static_cast<Eigen::Index>(unknown_input_dofs.size()), kNaN);
  m.state_rmse = Vector::Constant(2 * n, kNaN);
  if (completed == 0) return m;

  const long first = completed - window_steps;
  const int offset = 2 * n;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double scale = std::abs(true_params(j));
    if (scale == 0.0) throw ConfigError(fmt::format("true value of {} is zero", names[size_t(j)]));
    double sum = 0.0, sum_rel = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    for (long k = first; k < completed; ++k) {
      const double est = report.steps[size_t(k)].state(offset + j);
      const double rel = (est - true_params(j)) / scale;
      sum += est;
      sum_rel += rel;
      sum_abs += std::abs(rel);
      sum_sq += rel * rel;
    }
    const double count = static_cast<double>(window_steps);
    const double mean_rel = sum_rel / count;
    m.final_parameters(j) = sum / count;
    m.parameter_mean_rel_error(j) = sum_abs / count;
    m.parameter_std_rel_error(j) = std::sqrt(std::max(0.0, sum_sq / count - mean_rel * mean_rel));

    long settle = completed;
    for (long k = completed - 1; k >= 0; --k) {
      const double rel = std::abs(report.steps[size_t(k)].state(offset + j) - true_params(j)) / scale;
      if (!(rel < thresholds.mean_rel_error)) break;
      settle = k;
    }
    if (settle < completed) m.convergence_time(j) = report.steps[size_t(settle)].time;
  }

  for (size_t q = 0; q < unknown_input_dofs.size(); ++q) {
    const int dof = unknown_input_dofs[q];
    double sq = 0.0;
    for (long k = first; k < completed; ++k) {
      const auto& step = report.steps[size_t(k)];
      const double err = step.input_estimate.values(dof) - truth.inputs[size_t(step.step_index)](dof);
      sq += err * err;
    }
    m.input_rmse(static_cast<Eigen::Index>(q)) = std::sqrt(sq / static_cast<double>(window_steps));
  }
  for (int c = 0; c < 2 * n; ++c) {
    double sq = 0.0;
    for (long k = first; k < completed; ++k) {
      const auto& step = report.steps[size_t(k)];
      const double err = step.state(c) - truth.states[size_t(step.step_index)](c);
      sq += err * err;
    }
    m.state_rmse(c) = std::sqrt(sq / static_cast<double>(window_steps));
  }

  m.converged = !report.diverged;
  for (Eigen::Index j = 0; j < p && m.converged; ++j) {
    m.converged = m.parameter_mean_rel_error(j) < thresholds.mean_rel_error &&
                  m.parameter_std_rel_error(j) < thresholds.std_rel_error;
  }
  return m;
}

}  // namespace ipsukf
