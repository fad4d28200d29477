#include "ipsukf/chain_model.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

namespace ipsukf {

namespace {

// Story-wise force balance; identical in value to C v + K x + E cubic(x)
// with the tridiagonal / bidiagonal assemblies below.
Vector chain_force(const Vector& damping, const Vector& stiffness, const Vector& cubic,
                   const Vector& x, const Vector& v) {
  const auto n = x.size();
  Vector f = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = i == 0 ? x(0) : x(i) - x(i - 1);
    const double dv = i == 0 ? v(0) : v(i) - v(i - 1);
    double story = damping(i) * dv + stiffness(i) * d;
    if (cubic.size() == n && cubic(i) != 0.0) story += cubic(i) * d * d * d;
    f(i) += story;
    if (i > 0) f(i - 1) -= story;
  }
  return f;
}

void check_flags(const std::vector<bool>& flags, Eigen::Index n, const char* what) {
  if (!flags.empty() && static_cast<Eigen::Index>(flags.size()) != n) {
    throw ConfigError(fmt::format("{} estimate flags: got {}, expected {}", what, flags.size(), n));
  }
}

void append_slots(std::vector<ParameterSlot>& slots, const std::vector<bool>& flags,
                  Eigen::Index n, ParameterSlot::Kind kind) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if (flags.empty() || flags[static_cast<size_t>(i)]) {
      slots.push_back({kind, static_cast<int>(i)});
    }
  }
}

void check_properties(const ChainProperties& p) {
  const auto n = p.mass.size();
  if (n < 1) throw ConfigError("chain needs at least one DOF");
  if (p.damping.size() != n || p.stiffness.size() != n || p.cubic.size() != n) {
    throw ConfigError(fmt::format(
        "chain coefficient lengths disagree: mass {}, damping {}, stiffness {}, cubic {}", n,
        p.damping.size(), p.stiffness.size(), p.cubic.size()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(p.mass(i) > 0.0)) {
      throw ConfigError(fmt::format("mass m{} = {} must be positive", i + 1, p.mass(i)));
    }
  }
  if (!p.damping.allFinite() || !p.stiffness.allFinite() || !p.cubic.allFinite()) {
    throw ConfigError("chain coefficients must be finite");
  }
}

}  // namespace

Vector StructuralMatrices::restoring_force(const Vector& x, const Vector& v) const {
  Vector f = damping * v + stiffness * x;
  if (cubic.size() > 0) f += cubic * cubic_deformations(x);
  return f;
}

Vector StructuralMatrices::acceleration(const Vector& x, const Vector& v, const Vector& u) const {
  return (u - restoring_force(x, v)).cwiseQuotient(mass);
}

StructuralMatrices ChainProperties::matrices() const {
  return {mass, assemble_chain_matrix(damping), assemble_chain_matrix(stiffness),
          assemble_cubic_matrix(cubic.size() == mass.size() ? cubic
                                                            : Vector::Zero(mass.size()))};
}

Matrix assemble_chain_matrix(const Vector& c) {
  const auto n = c.size();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) += c(i);
    if (i > 0) {
      out(i - 1, i - 1) += c(i);
      out(i - 1, i) -= c(i);
      out(i, i - 1) -= c(i);
    }
  }
  return out;
}

Matrix assemble_cubic_matrix(const Vector& eps) {
  const auto n = eps.size();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = eps(i);
    if (i > 0) out(i - 1, i) = -eps(i);
  }
  return out;
}

Vector cubic_deformations(const Vector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = i == 0 ? x(0) : x(i) - x(i - 1);
    out(i) = d * d * d;
  }
  return out;
}

std::string ParameterSlot::name() const {
  const char prefix = kind == Kind::damping ? 'c' : kind == Kind::stiffness ? 'k' : 'e';
  return fmt::format("{}{}", prefix, story + 1);
}

ChainModel::ChainModel(ChainProperties nominal, std::vector<ParameterSlot> slots,
                       ObservationLayout layout)
    : nominal_(std::move(nominal)), slots_(std::move(slots)), observation_(layout) {
  check_properties(nominal_);
  if (!observation_.include_accelerations) {
    throw ConfigError(
        "observation layout must include accelerations (input recovery needs them)");
  }
  layout_ = {nominal_.n_dof(), static_cast<int>(slots_.size())};
}

bool ChainModel::nonlinear() const { return !nominal_.cubic.isZero(0.0); }

ChainProperties ChainModel::properties_from(const Vector& z) const {
  ChainProperties p = nominal_;
  const int offset = layout_.parameter_offset();
  for (size_t j = 0; j < slots_.size(); ++j) {
    const double value = z(offset + static_cast<int>(j));
    switch (slots_[j].kind) {
      case ParameterSlot::Kind::damping: p.damping(slots_[j].story) = value; break;
      case ParameterSlot::Kind::stiffness: p.stiffness(slots_[j].story) = value; break;
      case ParameterSlot::Kind::cubic: p.cubic(slots_[j].story) = value; break;
    }
  }
  return p;
}

Vector ChainModel::nominal_parameters() const {
  Vector theta(slots_.size());
  for (size_t j = 0; j < slots_.size(); ++j) {
    const auto& s = slots_[j];
    const Vector& src = s.kind == ParameterSlot::Kind::damping     ? nominal_.damping
                        : s.kind == ParameterSlot::Kind::stiffness ? nominal_.stiffness
                                                                   : nominal_.cubic;
    theta(static_cast<Eigen::Index>(j)) = src(s.story);
  }
  return theta;
}

ChainModel ChainModel::with_layout(const ObservationLayout& layout) const {
  return ChainModel(nominal_, slots_, layout);
}

Vector ChainModel::restoring_force(const Vector& z) const {
  const int n = layout_.n_dof;
  if (z.size() != layout_.size()) {
    throw ConfigError(fmt::format("state vector has {} entries, expected {}", z.size(),
                                  layout_.size()));
  }
  if (slots_.empty()) {
    return chain_force(nominal_.damping, nominal_.stiffness, nominal_.cubic, z.segment(0, n),
                       z.segment(n, n));
  }
  const ChainProperties p = properties_from(z);
  return chain_force(p.damping, p.stiffness, p.cubic, z.segment(0, n), z.segment(n, n));
}

Vector ChainModel::acceleration(const Vector& z, const Vector& u) const {
  return (u - restoring_force(z)).cwiseQuotient(nominal_.mass);
}

Vector ChainModel::transition(const Vector& z, const Vector& u, double dt) const {
  const int n = layout_.n_dof;
  Vector next = z;
  next.segment(0, n) += dt * z.segment(n, n);
  next.segment(n, n) += dt * acceleration(z, u);
  return next;
}

Vector ChainModel::recover_input(const Vector& accel, const Vector& z) const {
  return nominal_.mass.cwiseProduct(accel) + restoring_force(z);
}

ChainModel build_linear_chain(const LinearChainSpec& spec) {
  const auto n = spec.masses.size();
  check_flags(spec.estimate_damping, n, "damping");
  check_flags(spec.estimate_stiffness, n, "stiffness");
  ChainProperties p{spec.masses, spec.dampings, spec.stiffnesses, Vector::Zero(n)};
  check_properties(p);
  std::vector<ParameterSlot> slots;
  append_slots(slots, spec.estimate_damping, n, ParameterSlot::Kind::damping);
  append_slots(slots, spec.estimate_stiffness, n, ParameterSlot::Kind::stiffness);
  return ChainModel(std::move(p), std::move(slots), spec.layout);
}

ChainModel build_duffing_chain(const DuffingChainSpec& spec) {
  const auto n = spec.masses.size();
  check_flags(spec.estimate_damping, n, "damping");
  check_flags(spec.estimate_stiffness, n, "stiffness");
  check_flags(spec.estimate_cubic, n, "cubic");
  ChainProperties p{spec.masses, spec.dampings, spec.stiffnesses, spec.cubic};
  check_properties(p);
  std::vector<ParameterSlot> slots;
  append_slots(slots, spec.estimate_damping, n, ParameterSlot::Kind::damping);
  append_slots(slots, spec.estimate_stiffness, n, ParameterSlot::Kind::stiffness);
  append_slots(slots, spec.estimate_cubic, n, ParameterSlot::Kind::cubic);
  return ChainModel(std::move(p), std::move(slots), spec.layout);
}

}  // namespace ipsukf
