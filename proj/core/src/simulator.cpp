#include "ipsukf/simulator.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace ipsukf {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

bool pulse_active(const ExcitationComponent& c, double t) {
  const double eps = 1e-9 * std::max(1.0, std::abs(t));
  return t >= c.start - eps && t < c.start + c.duration - eps;
}

std::uint64_t mix_seed(std::uint64_t run_seed, std::uint64_t component_seed) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = run_seed * 0x9E3779B97F4A7C15ULL + component_seed + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

NormalSource::NormalSource(std::uint64_t seed) : NormalSource(seed, 0) {}

NormalSource::NormalSource(std::uint64_t seed, std::uint64_t stream)
    : engine_(seeded_engine(seed, stream)) {}

double NormalSource::uniform() {
  // 53 random bits mapped to (0, 1]
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalSource::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double phi = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

ExcitationComponent ExcitationComponent::pulse(int dof, double amplitude, double start,
                                               double duration) {
  ExcitationComponent c;
  c.kind = Kind::pulse;
  c.dof = dof;
  c.amplitude = amplitude;
  c.start = start;
  c.duration = duration;
  return c;
}

ExcitationComponent ExcitationComponent::white_noise(int dof, double mean, double variance,
                                                     std::uint64_t seed) {
  ExcitationComponent c;
  c.kind = Kind::white_noise;
  c.dof = dof;
  c.mean = mean;
  c.variance = variance;
  c.seed = seed;
  return c;
}

void ExcitationSpec::validate(int n_dof) const {
  for (size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    if (c.kind == ExcitationComponent::Kind::zero) continue;
    if (c.dof < 0 || c.dof >= n_dof) {
      throw ConfigError(
          fmt::format("excitation[{}]: target DOF {} outside 1..{}", i, c.dof + 1, n_dof));
    }
    if (c.kind == ExcitationComponent::Kind::pulse && !(c.duration > 0.0)) {
      throw ConfigError(fmt::format("excitation[{}]: pulse duration must be > 0", i));
    }
    if (c.kind == ExcitationComponent::Kind::white_noise && !(c.variance >= 0.0)) {
      throw ConfigError(fmt::format("excitation[{}]: variance must be >= 0", i));
    }
  }
}

Excitation::Excitation(const ExcitationSpec& spec, int n_dof, double dt, long n_samples,
                       std::uint64_t run_seed) {
  spec.validate(n_dof);
  samples_.assign(static_cast<size_t>(n_samples), Vector::Zero(n_dof));
  for (const auto& c : spec.components) {
    switch (c.kind) {
      case ExcitationComponent::Kind::zero: break;
      case ExcitationComponent::Kind::pulse:
        for (long k = 0; k < n_samples; ++k) {
          if (pulse_active(c, static_cast<double>(k) * dt)) samples_[size_t(k)](c.dof) += c.amplitude;
        }
        break;
      case ExcitationComponent::Kind::white_noise: {
        NormalSource normal(mix_seed(run_seed, c.seed), 0x5157u);
        const double sd = std::sqrt(c.variance);
        for (long k = 0; k < n_samples; ++k) samples_[size_t(k)](c.dof) += c.mean + sd * normal();
        break;
      }
    }
  }
}

Vector excitation_sample(const ExcitationSpec& spec, double t, double dt, int n_dof,
                         std::uint64_t run_seed) {
  const long index = std::lround(t / dt);
  Vector u = Vector::Zero(n_dof);
  spec.validate(n_dof);
  for (const auto& c : spec.components) {
    if (c.kind == ExcitationComponent::Kind::pulse && pulse_active(c, t)) u(c.dof) += c.amplitude;
  }
  bool any_noise = false;
  for (const auto& c : spec.components) any_noise |= c.kind == ExcitationComponent::Kind::white_noise;
  if (any_noise && index >= 0) {
    ExcitationSpec noise_only;
    for (const auto& c : spec.components) {
      if (c.kind == ExcitationComponent::Kind::white_noise) noise_only.components.push_back(c);
    }
    u += Excitation(noise_only, n_dof, dt, index + 1, run_seed).at(index);
  }
  return u;
}

long steps_in(double duration, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  const double ratio = duration / dt;
  const long steps = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-6 * std::max(1.0, ratio)) {
    throw ConfigError(fmt::format("duration {} is not a multiple of dt {}", duration, dt));
  }
  return steps;
}

Trajectory integrate_rk4(const StructuralMatrices& system, const std::vector<Vector>& inputs,
                         const Vector& x0, const Vector& v0, double dt,
                         const ForceFeedback& feedback) {
  const int n = system.n_dof();
  if (x0.size() != n || v0.size() != n) throw ConfigError("initial state size mismatch");
  if (inputs.empty()) throw ConfigError("input sequence is empty");

  auto accel = [&](const Vector& x, const Vector& v, const Vector& u) {
    if (feedback) return system.acceleration(x, v, u + feedback(x, v));
    return system.acceleration(x, v, u);
  };

  Trajectory traj;
  const size_t count = inputs.size();
  traj.times.reserve(count);
  traj.states.reserve(count);
  traj.accelerations.reserve(count);
  traj.inputs = inputs;

  Vector x = x0;
  Vector v = v0;
  for (size_t k = 0; k < count; ++k) {
    const Vector& u = inputs[k];
    Vector s(2 * n);
    s << x, v;
    traj.times.push_back(static_cast<double>(k) * dt);
    traj.states.push_back(s);
    traj.accelerations.push_back(accel(x, v, u));
    if (k + 1 == count) break;

    const Vector k1x = v;
    const Vector k1v = traj.accelerations.back();
    const Vector k2x = v + 0.5 * dt * k1v;
    const Vector k2v = accel(x + 0.5 * dt * k1x, k2x, u);
    const Vector k3x = v + 0.5 * dt * k2v;
    const Vector k3v = accel(x + 0.5 * dt * k2x, k3x, u);
    const Vector k4x = v + dt * k3v;
    const Vector k4v = accel(x + dt * k3x, k4x, u);
    x += (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (!x.allFinite() || !v.allFinite()) {
      throw SimulationError(fmt::format("simulation blew up at t = {}", double(k + 1) * dt));
    }
  }
  return traj;
}

Trajectory rk4_simulate(const ChainProperties& truth, const ExcitationSpec& excitation,
                        const Vector& initial_state, double dt, double duration,
                        std::uint64_t run_seed) {
  const int n = truth.n_dof();
  if (initial_state.size() != 2 * n) {
    throw ConfigError(fmt::format("initial state needs {} entries", 2 * n));
  }
  const long steps = steps_in(duration, dt);
  const Excitation u(excitation, n, dt, steps + 1, run_seed);
  return integrate_rk4(truth.matrices(), u.samples(), initial_state.head(n),
                       initial_state.tail(n), dt);
}

std::vector<Vector> clean_measurements(const Trajectory& traj, const ObservationLayout& layout) {
  const int n = traj.n_dof();
  std::vector<Vector> out;
  out.reserve(traj.states.size());
  for (long k = 0; k < traj.size(); ++k) {
    Vector y(layout.dimension(n));
    int row = 0;
    if (layout.include_displacements) {
      y.segment(row, n) = traj.displacement(k);
      row += n;
    }
    if (layout.include_velocities) {
      y.segment(row, n) = traj.velocity(k);
      row += n;
    }
    if (layout.include_accelerations) y.segment(row, n) = traj.accelerations[size_t(k)];
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<Vector> synthesize_measurements(const Trajectory& traj,
                                            const ObservationLayout& layout,
                                            const NoiseSpec& noise) {
  if (!(noise.rms_ratio >= 0.0)) throw ConfigError("noise rms_ratio must be >= 0");
  std::vector<Vector> y = clean_measurements(traj, layout);
  if (noise.rms_ratio == 0.0 || y.empty()) return y;

  const auto m = y.front().size();
  for (Eigen::Index j = 0; j < m; ++j) {
    double sum_sq = 0.0;
    for (const auto& row : y) sum_sq += row(j) * row(j);
    const double sd = noise.rms_ratio * std::sqrt(sum_sq / static_cast<double>(y.size()));
    if (sd == 0.0) continue;
    NormalSource normal(noise.seed, static_cast<std::uint64_t>(j) + 1);
    for (auto& row : y) row(j) += sd * normal();
  }
  return y;
}

}  // namespace ipsukf
