#pragma once

#include "ipsukf/system_model.hpp"

#include <string>
#include <vector>

namespace ipsukf {

/// Matrix form of M xdd + C xd + K x + E cubic(x) = u with diagonal M.
/// The cubic vector is [x_1^3, (x_2 - x_1)^3, ..., (x_n - x_{n-1})^3].
struct StructuralMatrices {
  Vector mass;  ///< diagonal of M
  Matrix damping;
  Matrix stiffness;
  Matrix cubic;  ///< E; zero for linear systems

  int n_dof() const { return static_cast<int>(mass.size()); }
  /// C xd + K x + E cubic(x).
  Vector restoring_force(const Vector& x, const Vector& v) const;
  /// M^{-1} (u - restoring_force).
  Vector acceleration(const Vector& x, const Vector& v, const Vector& u) const;
};

/// Story-wise coefficients of a shear chain. Story i connects DOF i-1 and i
/// (story 1 connects DOF 1 to the ground).
struct ChainProperties {
  Vector mass;
  Vector damping;
  Vector stiffness;
  Vector cubic;  ///< story-wise cubic coefficients, zeros for a linear chain

  int n_dof() const { return static_cast<int>(mass.size()); }
  StructuralMatrices matrices() const;
};

/// Tridiagonal chain assembly: [c1+c2, -c2, 0; -c2, c2+c3, -c3; 0, -c3, c3].
Matrix assemble_chain_matrix(const Vector& story_coefficients);
/// Upper-bidiagonal cubic coupling: E(i,i) = eps_i, E(i-1,i) = -eps_i.
Matrix assemble_cubic_matrix(const Vector& story_coefficients);
/// [x_1^3, (x_2 - x_1)^3, ...].
Vector cubic_deformations(const Vector& x);

struct LinearChainSpec {
  Vector masses;
  Vector dampings;
  Vector stiffnesses;
  /// Empty means "estimate all"; otherwise one flag per story.
  std::vector<bool> estimate_damping;
  std::vector<bool> estimate_stiffness;
  ObservationLayout layout = ObservationLayout::full();
};

struct DuffingChainSpec {
  Vector masses;
  Vector dampings;
  Vector stiffnesses;
  Vector cubic;  ///< eps_i [N/m^3]
  std::vector<bool> estimate_damping;
  std::vector<bool> estimate_stiffness;
  std::vector<bool> estimate_cubic;
  ObservationLayout layout = ObservationLayout::full();
};

/// Which physical coefficient a parameter slot refers to.
struct ParameterSlot {
  enum class Kind { damping, stiffness, cubic };
  Kind kind;
  int story;  ///< zero-based

  /// "c1", "k3", "e2", ...
  std::string name() const;
};

/// Shear-chain model with optional cubic springs. Parameters in the state
/// are ordered [estimated c | estimated k | estimated eps]; coefficients that
/// are not estimated keep their nominal values. The transition is a single
/// explicit-Euler step of the equation of motion.
class ChainModel final : public SystemModel {
 public:
  ChainModel(ChainProperties nominal, std::vector<ParameterSlot> slots,
             ObservationLayout layout);

  StateLayout state_layout() const override { return layout_; }
  const ObservationLayout& observation_layout() const override { return observation_; }
  const Vector& masses() const override { return nominal_.mass; }

  Vector transition(const Vector& z, const Vector& u, double dt) const override;
  Vector acceleration(const Vector& z, const Vector& u) const override;
  Vector recover_input(const Vector& accel, const Vector& z) const override;

  const ChainProperties& nominal() const { return nominal_; }
  const std::vector<ParameterSlot>& parameter_slots() const { return slots_; }
  bool nonlinear() const;

  /// Nominal coefficients with the estimated ones replaced by theta from z.
  ChainProperties properties_from(const Vector& z) const;
  /// Parameter vector theta holding the nominal values of every slot.
  Vector nominal_parameters() const;

  /// Same system observed through another layout.
  ChainModel with_layout(const ObservationLayout& layout) const;

 private:
  /// C xd + K x + E cubic(x) with coefficients taken from z.
  Vector restoring_force(const Vector& z) const;

  ChainProperties nominal_;
  std::vector<ParameterSlot> slots_;
  ObservationLayout observation_;
  StateLayout layout_;
};

ChainModel build_linear_chain(const LinearChainSpec& spec);
ChainModel build_duffing_chain(const DuffingChainSpec& spec);

}  // namespace ipsukf
