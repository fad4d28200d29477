#include "ipsukf/errors.hpp"
#include "ipsukf/experiment.hpp"

#include <fmt/format.h>

namespace ipsukf {

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

std::vector<std::uint64_t> default_seeds() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

// Dynamic states start at rest; parameter guesses at half the true values;
// P0 = 1e-2 on dynamic states and 1 on parameters.
void default_init(ExperimentConfig& c) {
  const int n = c.model.n_dof();
  const ChainModel m = c.build_model();
  c.init.states = Vector::Zero(2 * n);
  c.init.parameters = 0.5 * m.nominal_parameters();
  c.init.p0_states = Vector::Constant(2 * n, 1e-2);
  c.init.p0_parameters = Vector::Constant(m.n_params(), 1.0);
  c.init.input = Vector::Zero(n);
}

ExperimentConfig linear3dof(std::string name) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.model.kind = ModelConfig::Kind::linear_chain;
  c.model.masses = vec({1.0, 1.0, 1.0});
  c.model.dampings = vec({0.25, 0.5, 0.75});
  c.model.stiffnesses = vec({9.0, 11.0, 13.0});
  c.unknown_input_dofs = {2};
  c.layout = ObservationLayout::full();
  c.noise_rms_ratio = 0.05;
  c.filter.q_diag = Vector::Constant(12, 1e-9);
  c.filter.r_diag = Vector::Constant(9, 1e-3);
  c.filter.dt = 0.01;
  c.filter.duration = 30.0;
  c.seeds = default_seeds();
  default_init(c);
  return c;
}

ExperimentConfig duffing2dof(std::string name, ObservationLayout layout) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.model.kind = ModelConfig::Kind::duffing_chain;
  c.model.masses = vec({1.0, 1.0});
  c.model.dampings = vec({0.5, 0.5});
  c.model.stiffnesses = vec({3.0, 4.5});
  c.model.cubic = vec({15.0, 27.0});
  c.excitation.components = {ExcitationComponent::pulse(1, 100.0, 5.0, 0.01),
                             ExcitationComponent::white_noise(1, 0.0, 4.0, 0)};
  c.unknown_input_dofs = {1};
  c.layout = layout;
  c.noise_rms_ratio = 0.05;
  c.filter.q_diag = Vector::Constant(10, 1e-9);
  c.filter.r_diag = Vector::Constant(layout.dimension(2), 1e-5);
  c.filter.dt = 0.01;
  c.filter.duration = 30.0;
  c.seeds = default_seeds();
  default_init(c);
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"linear3dof-pulse", "linear3dof-ambient", "duffing2dof",
          "duffing-no-disp",  "duffing-no-vel",     "duffing-accel-only"};
}

ExperimentConfig preset(std::string_view name) {
  if (name == "linear3dof-pulse") {
    ExperimentConfig c = linear3dof(std::string(name));
    c.excitation.components = {ExcitationComponent::pulse(2, 100.0, 5.0, 0.01)};
    return c;
  }
  if (name == "linear3dof-ambient") {
    ExperimentConfig c = linear3dof(std::string(name));
    c.excitation.components = {ExcitationComponent::white_noise(2, 0.0, 4.0, 0)};
    return c;
  }
  if (name == "duffing2dof") return duffing2dof(std::string(name), ObservationLayout::full());
  if (name == "duffing-no-disp") {
    return duffing2dof(std::string(name), ObservationLayout::no_displacement());
  }
  if (name == "duffing-no-vel") {
    return duffing2dof(std::string(name), ObservationLayout::no_velocity());
  }
  if (name == "duffing-accel-only") {
    return duffing2dof(std::string(name), ObservationLayout::acceleration_only());
  }
  throw ConfigError(fmt::format("unknown preset '{}'", name));
}

}  // namespace ipsukf
