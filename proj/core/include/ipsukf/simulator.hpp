#pragma once

#include "ipsukf/chain_model.hpp"
#include "ipsukf/system_model.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace ipsukf {

/// Standard normal draws from mt19937_64 through an explicit Box-Muller
/// transform, so a seed gives the same sequence with every standard library.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed);
  NormalSource(std::uint64_t seed, std::uint64_t stream);

  double operator()();

 private:
  double uniform();  // (0, 1]

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct ExcitationComponent {
  enum class Kind { pulse, white_noise, zero };

  Kind kind = Kind::zero;
  int dof = 0;  ///< zero-based target DOF
  // pulse
  double amplitude = 0.0;  ///< N
  double start = 0.0;      ///< s
  double duration = 0.0;   ///< s
  // white noise
  double mean = 0.0;      ///< N
  double variance = 0.0;  ///< N^2
  std::uint64_t seed = 0;

  static ExcitationComponent pulse(int dof, double amplitude, double start, double duration);
  static ExcitationComponent white_noise(int dof, double mean, double variance,
                                         std::uint64_t seed);
};

/// Superposition of components; an empty list is the zero excitation.
struct ExcitationSpec {
  std::vector<ExcitationComponent> components;

  void validate(int n_dof) const;
};

/// Excitation sampled on a uniform grid; white-noise components draw once
/// per sample index. `run_seed` is mixed with each component's own seed.
class Excitation {
 public:
  Excitation(const ExcitationSpec& spec, int n_dof, double dt, long n_samples,
             std::uint64_t run_seed = 0);

  const Vector& at(long index) const { return samples_[static_cast<size_t>(index)]; }
  const std::vector<Vector>& samples() const { return samples_; }
  long size() const { return static_cast<long>(samples_.size()); }

 private:
  std::vector<Vector> samples_;
};

/// Input vector at time t on the grid with period dt. A pulse contributes on
/// [start, start + duration); white noise uses the draw of sample round(t/dt).
Vector excitation_sample(const ExcitationSpec& spec, double t, double dt, int n_dof,
                         std::uint64_t run_seed = 0);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;         ///< [x | xdot]
  std::vector<Vector> accelerations;  ///< from the equation of motion at each sample
  std::vector<Vector> inputs;         ///< held constant over [t_k, t_{k+1})

  long size() const { return static_cast<long>(times.size()); }
  int n_dof() const { return states.empty() ? 0 : static_cast<int>(states.front().size() / 2); }
  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  Vector displacement(long k) const { return states[size_t(k)].head(n_dof()); }
  Vector velocity(long k) const { return states[size_t(k)].tail(n_dof()); }
};

/// Extra state-dependent force added to the sampled input inside every
/// Runge-Kutta stage.
using ForceFeedback = std::function<Vector(const Vector& x, const Vector& v)>;

/// Classical RK4 on the first-order form of the equation of motion with
/// zero-order-hold inputs; inputs[k] acts on [t_k, t_{k+1}).
Trajectory integrate_rk4(const StructuralMatrices& system, const std::vector<Vector>& inputs,
                         const Vector& x0, const Vector& v0, double dt,
                         const ForceFeedback& feedback = {});

/// Truth trajectory over [0, duration] with duration a multiple of dt.
Trajectory rk4_simulate(const ChainProperties& truth, const ExcitationSpec& excitation,
                        const Vector& initial_state, double dt, double duration,
                        std::uint64_t run_seed = 0);

struct NoiseSpec {
  double rms_ratio = 0.0;
  std::uint64_t seed = 0;
};

/// Noise-free measurement vectors per the layout, one per sample.
std::vector<Vector> clean_measurements(const Trajectory& traj, const ObservationLayout& layout);

/// Adds independent Gaussian noise per channel with standard deviation
/// rms_ratio * RMS(channel) over the full record. A zero-RMS channel gets no noise.
std::vector<Vector> synthesize_measurements(const Trajectory& traj,
                                            const ObservationLayout& layout,
                                            const NoiseSpec& noise);

/// Number of grid steps in `duration`; throws if it is not a multiple of dt.
long steps_in(double duration, double dt);

}  // namespace ipsukf
