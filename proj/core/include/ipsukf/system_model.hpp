#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ipsukf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Partition of the augmented state z = [x | xdot | theta].
struct StateLayout {
  int n_dof = 0;
  int n_params = 0;

  int size() const { return 2 * n_dof + n_params; }
  int displacement_offset() const { return 0; }
  int velocity_offset() const { return n_dof; }
  int parameter_offset() const { return 2 * n_dof; }

  bool operator==(const StateLayout&) const = default;
};

/// Thin wrapper that ties a state vector to its partition.
class AugmentedState {
 public:
  AugmentedState() = default;
  AugmentedState(StateLayout layout, Vector values);

  const StateLayout& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  auto displacements() const { return values_.segment(0, layout_.n_dof); }
  auto velocities() const { return values_.segment(layout_.n_dof, layout_.n_dof); }
  auto parameters() const {
    return values_.segment(layout_.parameter_offset(), layout_.n_params);
  }

 private:
  StateLayout layout_;
  Vector values_;
};

/// Which channel groups a measurement vector carries. Groups are always
/// stacked in the order [displacements | velocities | accelerations].
struct ObservationLayout {
  bool include_displacements = true;
  bool include_velocities = true;
  bool include_accelerations = true;

  static ObservationLayout full() { return {true, true, true}; }
  static ObservationLayout no_displacement() { return {false, true, true}; }
  static ObservationLayout no_velocity() { return {true, false, true}; }
  static ObservationLayout acceleration_only() { return {false, false, true}; }

  int groups() const {
    return int(include_displacements) + int(include_velocities) +
           int(include_accelerations);
  }
  int dimension(int n_dof) const { return groups() * n_dof; }
  /// Row offset of the acceleration group, or -1 when absent.
  int acceleration_offset(int n_dof) const;
  std::string name() const;

  bool operator==(const ObservationLayout&) const = default;
};

/// Per-DOF input vector together with the rows whose value is known a priori.
struct InputFrame {
  Vector values;
  std::vector<bool> known_mask;
  Vector known_values;

  /// All rows unknown, values zero.
  static InputFrame unknown(int n_dof);
  /// Every row known and equal to `values`.
  static InputFrame known(const Vector& values);

  int size() const { return static_cast<int>(values.size()); }
  bool consistent() const;
  /// True when every known row of `values` equals its known value bit-for-bit.
  bool satisfies_mask() const;
};

/// Overwrites the known rows of `raw` with their known values.
InputFrame apply_known_mask(InputFrame raw);

/// Contract for one structural system seen through the filter: the discrete
/// transition F, the observation h and the input recovery G. Implementations
/// are immutable and their evaluation functions are pure.
class SystemModel {
 public:
  virtual ~SystemModel() = default;

  virtual StateLayout state_layout() const = 0;
  virtual const ObservationLayout& observation_layout() const = 0;
  virtual const Vector& masses() const = 0;

  /// z_k = F(z_{k-1}, u_{k-1}); parameter rows are copied through.
  virtual Vector transition(const Vector& z, const Vector& u, double dt) const = 0;
  /// Accelerations implied by the equation of motion at state z under input u.
  virtual Vector acceleration(const Vector& z, const Vector& u) const = 0;
  /// Input that makes the equation of motion hold for the given accelerations.
  virtual Vector recover_input(const Vector& accel, const Vector& z) const = 0;

  /// h(z, u) restricted to the model's own observation layout.
  Vector observe(const Vector& z, const Vector& u) const;

  int n_dof() const { return state_layout().n_dof; }
  int n_params() const { return state_layout().n_params; }
  int state_dim() const { return state_layout().size(); }
  int observation_dim() const { return observation_layout().dimension(n_dof()); }
};

/// h(z, u) for an arbitrary layout.
Vector observe(const SystemModel& model, const Vector& z, const Vector& u,
               const ObservationLayout& layout);

}  // namespace ipsukf
