#pragma once

#include "ipsukf/system_model.hpp"

namespace ipsukf {

/// Tuning and noise description of the unscented filter.
struct FilterConfig {
  double alpha = 1e-2;  ///< sigma spread, admissible range [1e-4, 1]
  double beta = 2.0;    ///< prior-distribution constant (2 is optimal for Gaussians)
  double kappa = 0.0;   ///< secondary scaling, usually 0 or 3 - L
  Matrix process_cov;   ///< Q_{k-1}, L x L
  Matrix measurement_cov;  ///< R_k, m x m
  double dt = 0.01;     ///< sampling period [s]

  double lambda(int L) const { return alpha * alpha * (L + kappa) - L; }

  /// Checks ranges and the Q/R shapes against the given dimensions.
  void validate(int state_dim, int measurement_dim) const;
};

/// Discrete covariance from a continuous-time spectral density, divided by
/// the sampling period as Q_k = Q(k dt) / dt.
Matrix discretize_covariance(const Matrix& continuous, double dt);

struct WeightSet {
  Vector mean;  ///< V^m, length 2L+1
  Vector cov;   ///< V^c, length 2L+1
  double lambda = 0.0;

  int state_dim() const { return static_cast<int>((mean.size() - 1) / 2); }
};

WeightSet compute_weights(int L, const FilterConfig& config);

/// Sigma points stored column-wise: column 0 is the centre, columns 1..L are
/// z + sqrt((L+lambda)P) e_i and columns L+1..2L are z - sqrt((L+lambda)P) e_i.
struct SigmaSet {
  Matrix points;

  int state_dim() const { return static_cast<int>(points.rows()); }
  int count() const { return static_cast<int>(points.cols()); }
  Vector point(int i) const { return points.col(i); }
};

/// Lower Cholesky factor of `scale * P`. Adds diagonal jitter starting at
/// 1e-12 trace(P)/L and growing x10 up to 1e-6 trace(P)/L before giving up
/// with a NumericalError that reports the smallest eigenvalue of P.
Matrix scaled_square_root(const Matrix& P, double scale);

SigmaSet generate_sigma_points(const Vector& z, const Matrix& P, const FilterConfig& config);

/// Weighted mean and weighted scatter of a sigma set (no noise term added).
/// The mean assumes the weights sum to one.
Vector weighted_mean(const Matrix& points, const Vector& weights);
Matrix weighted_scatter(const Matrix& points, const Vector& mean, const Vector& weights);
Matrix weighted_cross(const Matrix& a, const Vector& a_mean, const Matrix& b,
                      const Vector& b_mean, const Vector& weights);

struct Prediction {
  Vector mean;
  Matrix cov;
  SigmaSet propagated;
};

/// Propagates every sigma point through F with the previous input and
/// forms the predicted mean and covariance (+Q). `step` is only used to
/// label a DivergenceError.
Prediction predict(const SigmaSet& sigma, const SystemModel& model, const Vector& u_prev,
                   const FilterConfig& config, long step = -1);

struct Posterior {
  Vector mean;
  Matrix cov;
};

/// Measurement update against y_meas. The gain P_s P_m^{-1} is obtained by a
/// Cholesky solve on P_m; the returned covariance is symmetrized.
Posterior update(const Vector& z_p, const Matrix& P_p, const SigmaSet& propagated,
                 const Vector& y_meas, const SystemModel& model, const Vector& u_now,
                 const FilterConfig& config, long step = -1);

/// Mean and covariance carried between steps.
struct FilterState {
  Vector mean;
  Matrix cov;
};

/// One step of the joint parameter-state filter with a known input:
/// sigma generation, prediction with u_prev, update with u_now.
FilterState standard_step(const FilterState& state, const Vector& y_meas,
                          const SystemModel& model, const Vector& u_prev,
                          const Vector& u_now, const FilterConfig& config, long step = -1);

}  // namespace ipsukf
