#include "ipsukf/system_model.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

namespace ipsukf {

AugmentedState::AugmentedState(StateLayout layout, Vector values)
    : layout_(layout), values_(std::move(values)) {
  if (values_.size() != layout_.size()) {
    throw ConfigError(fmt::format("augmented state has {} entries, layout needs 2*{}+{}={}",
                                  values_.size(), layout_.n_dof, layout_.n_params,
                                  layout_.size()));
  }
}

int ObservationLayout::acceleration_offset(int n_dof) const {
  if (!include_accelerations) return -1;
  return (int(include_displacements) + int(include_velocities)) * n_dof;
}

std::string ObservationLayout::name() const {
  if (include_displacements && include_velocities && include_accelerations) return "full";
  if (!include_displacements && include_velocities && include_accelerations)
    return "no-displacement";
  if (include_displacements && !include_velocities && include_accelerations) return "no-velocity";
  if (!include_displacements && !include_velocities && include_accelerations)
    return "acceleration-only";
  return fmt::format("d{}v{}a{}", int(include_displacements), int(include_velocities),
                     int(include_accelerations));
}

InputFrame InputFrame::unknown(int n_dof) {
  return {Vector::Zero(n_dof), std::vector<bool>(static_cast<size_t>(n_dof), false),
          Vector::Zero(n_dof)};
}

InputFrame InputFrame::known(const Vector& values) {
  return {values, std::vector<bool>(static_cast<size_t>(values.size()), true), values};
}

bool InputFrame::consistent() const {
  return static_cast<Eigen::Index>(known_mask.size()) == values.size() &&
         known_values.size() == values.size();
}

bool InputFrame::satisfies_mask() const {
  if (!consistent()) return false;
  for (int i = 0; i < size(); ++i) {
    if (known_mask[static_cast<size_t>(i)] && values(i) != known_values(i)) return false;
  }
  return true;
}

InputFrame apply_known_mask(InputFrame raw) {
  if (!raw.consistent()) {
    throw ConfigError(fmt::format("input frame sizes disagree: values {}, mask {}, known {}",
                                  raw.values.size(), raw.known_mask.size(),
                                  raw.known_values.size()));
  }
  for (int i = 0; i < raw.size(); ++i) {
    if (raw.known_mask[static_cast<size_t>(i)]) raw.values(i) = raw.known_values(i);
  }
  return raw;
}

Vector SystemModel::observe(const Vector& z, const Vector& u) const {
  return ipsukf::observe(*this, z, u, observation_layout());
}

Vector observe(const SystemModel& model, const Vector& z, const Vector& u,
               const ObservationLayout& layout) {
  const int n = model.n_dof();
  if (z.size() != model.state_dim() || u.size() != n) {
    throw ConfigError(fmt::format("observe: state {} / input {} do not match model ({}, {})",
                                  z.size(), u.size(), model.state_dim(), n));
  }
  Vector y(layout.dimension(n));
  int row = 0;
  if (layout.include_displacements) {
    y.segment(row, n) = z.segment(0, n);
    row += n;
  }
  if (layout.include_velocities) {
    y.segment(row, n) = z.segment(n, n);
    row += n;
  }
  if (layout.include_accelerations) {
    y.segment(row, n) = model.acceleration(z, u);
  }
  return y;
}

}  // namespace ipsukf
