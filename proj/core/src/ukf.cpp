#include "ipsukf/ukf.hpp"

#include "ipsukf/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace ipsukf {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace

void FilterConfig::validate(int state_dim, int measurement_dim) const {
  if (!(alpha >= 1e-4 && alpha <= 1.0)) {
    throw ConfigError(fmt::format("alpha = {} outside [1e-4, 1]", alpha));
  }
  if (!std::isfinite(beta) || !std::isfinite(kappa)) {
    throw ConfigError("beta and kappa must be finite");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ConfigError(fmt::format("dt = {} must be positive", dt));
  }
  const double l = lambda(state_dim);
  if (!std::isfinite(l) || state_dim + l <= 0.0) {
    throw ConfigError(fmt::format("L + lambda = {} must be positive", state_dim + l));
  }
  if (process_cov.rows() != state_dim || process_cov.cols() != state_dim) {
    throw ConfigError(fmt::format("process covariance is {}x{}, expected {}x{}",
                                  process_cov.rows(), process_cov.cols(), state_dim,
                                  state_dim));
  }
  if (measurement_cov.rows() != measurement_dim || measurement_cov.cols() != measurement_dim) {
    throw ConfigError(fmt::format("measurement covariance is {}x{}, expected {}x{}",
                                  measurement_cov.rows(), measurement_cov.cols(),
                                  measurement_dim, measurement_dim));
  }
  if (!process_cov.isApprox(process_cov.transpose()) ||
      !measurement_cov.isApprox(measurement_cov.transpose())) {
    throw ConfigError("process and measurement covariances must be symmetric");
  }
  Eigen::LLT<Matrix> r_llt(measurement_cov);
  if (r_llt.info() != Eigen::Success) {
    throw ConfigError("measurement covariance must be positive definite");
  }
  if (state_dim > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> q_eig(process_cov, Eigen::EigenvaluesOnly);
    if (q_eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, process_cov.trace())) {
      throw ConfigError("process covariance must be positive semi-definite");
    }
  }
}

Matrix discretize_covariance(const Matrix& continuous, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  return continuous / dt;
}

WeightSet compute_weights(int L, const FilterConfig& config) {
  if (L < 1) throw ConfigError(fmt::format("state dimension {} must be >= 1", L));
  if (!(config.alpha >= 1e-4 && config.alpha <= 1.0)) {
    throw ConfigError(fmt::format("alpha = {} outside [1e-4, 1]", config.alpha));
  }
  const double lambda = config.lambda(L);
  const double spread = L + lambda;
  if (!std::isfinite(lambda) || spread <= 0.0) {
    throw ConfigError(fmt::format(
        "sigma scaling undefined: L + lambda = {} (alpha={}, kappa={})", spread,
        config.alpha, config.kappa));
  }

  WeightSet w;
  w.lambda = lambda;
  w.mean = Vector::Constant(2 * L + 1, 1.0 / (2.0 * spread));
  w.cov = w.mean;
  w.mean(0) = lambda / spread;
  w.cov(0) = lambda / spread + (1.0 - config.alpha * config.alpha + config.beta);
  return w;
}

Matrix scaled_square_root(const Matrix& P, double scale) {
  const auto L = P.rows();
  if (P.isZero(0.0)) return Matrix::Zero(L, L);

  Eigen::LLT<Matrix> llt(scale * P);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double base = std::abs(P.trace()) / static_cast<double>(L);
  for (double jitter = 1e-12 * base; jitter <= 1e-6 * base * (1 + 1e-9); jitter *= 10.0) {
    Matrix jittered = P;
    jittered.diagonal().array() += jitter;
    llt.compute(scale * jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(P, Eigen::EigenvaluesOnly);
  throw NumericalError(fmt::format(
      "covariance square root failed after jitter escalation; smallest eigenvalue {:.6e}",
      eig.eigenvalues().minCoeff()));
}

SigmaSet generate_sigma_points(const Vector& z, const Matrix& P, const FilterConfig& config) {
  const int L = static_cast<int>(z.size());
  if (P.rows() != L || P.cols() != L) {
    throw ConfigError(fmt::format("covariance is {}x{}, state has {} entries", P.rows(),
                                  P.cols(), L));
  }
  const double spread = L + config.lambda(L);
  if (!(spread > 0.0)) {
    throw ConfigError(fmt::format("sigma scaling undefined: L + lambda = {}", spread));
  }
  const Matrix root = scaled_square_root(P, spread);

  SigmaSet sigma;
  sigma.points.resize(L, 2 * L + 1);
  sigma.points.col(0) = z;
  for (int i = 0; i < L; ++i) {
    sigma.points.col(1 + i) = z + root.col(i);
    sigma.points.col(1 + L + i) = z - root.col(i);
  }
  return sigma;
}

Vector weighted_mean(const Matrix& points, const Vector& weights) {
  // offsets from the centre point: large opposite-signed weights cancel less
  const Vector centre = points.col(0);
  Vector offset = Vector::Zero(points.rows());
  for (Eigen::Index i = 1; i < points.cols(); ++i) {
    offset += weights(i) * (points.col(i) - centre);
  }
  return centre + offset;
}

Matrix weighted_scatter(const Matrix& points, const Vector& mean, const Vector& weights) {
  return weighted_cross(points, mean, points, mean, weights);
}

Matrix weighted_cross(const Matrix& a, const Vector& a_mean, const Matrix& b,
                      const Vector& b_mean, const Vector& weights) {
  Matrix out = Matrix::Zero(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    out.noalias() += weights(i) * (a.col(i) - a_mean) * (b.col(i) - b_mean).transpose();
  }
  return out;
}

Prediction predict(const SigmaSet& sigma, const SystemModel& model, const Vector& u_prev,
                   const FilterConfig& config, long step) {
  const int L = sigma.state_dim();
  if (L != model.state_dim()) {
    throw ConfigError(fmt::format("sigma points have dimension {}, model expects {}", L,
                                  model.state_dim()));
  }
  if (u_prev.size() != model.n_dof()) {
    throw ConfigError(fmt::format("input has {} rows, model has {} DOFs", u_prev.size(),
                                  model.n_dof()));
  }
  const WeightSet w = compute_weights(L, config);

  Prediction out;
  out.propagated.points.resize(L, sigma.count());
  for (int i = 0; i < sigma.count(); ++i) {
    out.propagated.points.col(i) = model.transition(sigma.points.col(i), u_prev, config.dt);
  }
  if (!all_finite(out.propagated.points)) {
    throw DivergenceError(fmt::format("non-finite sigma point after propagation at step {}", step),
                          step);
  }
  out.mean = weighted_mean(out.propagated.points, w.mean);
  out.cov = weighted_scatter(out.propagated.points, out.mean, w.cov) + config.process_cov;
  return out;
}

Posterior update(const Vector& z_p, const Matrix& P_p, const SigmaSet& propagated,
                 const Vector& y_meas, const SystemModel& model, const Vector& u_now,
                 const FilterConfig& config, long step) {
  const int L = propagated.state_dim();
  const int m = model.observation_dim();
  if (y_meas.size() != m) {
    throw ConfigError(fmt::format("measurement has {} entries, model observes {}", y_meas.size(),
                                  m));
  }
  const WeightSet w = compute_weights(L, config);

  Matrix images(m, propagated.count());
  for (int i = 0; i < propagated.count(); ++i) {
    images.col(i) = model.observe(propagated.points.col(i), u_now);
  }
  if (!all_finite(images)) {
    throw DivergenceError(fmt::format("non-finite measurement image at step {}", step), step);
  }
  const Vector y_mean = weighted_mean(images, w.mean);
  const Matrix P_m = weighted_scatter(images, y_mean, w.cov) + config.measurement_cov;
  const Matrix P_s = weighted_cross(propagated.points, z_p, images, y_mean, w.cov);

  Eigen::LLT<Matrix> llt(P_m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(fmt::format(
        "innovation covariance not positive definite at step {} (measurement covariance too "
        "small?)",
        step));
  }
  // P_m is symmetric, so (P_s P_m^{-1})^T = P_m^{-1} P_s^T.
  const Matrix gain = llt.solve(P_s.transpose()).transpose();
  if (!all_finite(gain)) {
    throw DivergenceError(fmt::format("non-finite Kalman gain at step {}", step), step);
  }

  Posterior post;
  post.mean = z_p + gain * (y_meas - y_mean);
  post.cov = P_p - P_s * gain.transpose();
  symmetrize(post.cov);
  if (!post.mean.allFinite() || !post.cov.allFinite()) {
    throw DivergenceError(fmt::format("non-finite posterior at step {}", step), step);
  }
  return post;
}

FilterState standard_step(const FilterState& state, const Vector& y_meas,
                          const SystemModel& model, const Vector& u_prev,
                          const Vector& u_now, const FilterConfig& config, long step) {
  const SigmaSet sigma = generate_sigma_points(state.mean, state.cov, config);
  const Prediction pred = predict(sigma, model, u_prev, config, step);
  Posterior post = update(pred.mean, pred.cov, pred.propagated, y_meas, model, u_now, config, step);
  return {std::move(post.mean), std::move(post.cov)};
}

}  // namespace ipsukf
