#pragma once

// Reference implementations used only by the tests. They are written
// directly against Eigen and share no code with the library.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Shear-chain matrices assembled by hand from story coefficients.
inline MatrixXd chain(const VectorXd& s) {
  const auto n = s.size();
  MatrixXd m = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) += s(i);
    if (i + 1 < n) {
      m(i, i) += s(i + 1);
      m(i, i + 1) = -s(i + 1);
      m(i + 1, i) = -s(i + 1);
    }
  }
  return m;
}

/// Discrete linear system z' = A z + B u, y = H z + D u obtained from one
/// explicit Euler step of M xdd + C xd + K x = u and full [x | xd | xdd] output.
struct LinearSystem {
  MatrixXd A, B, H, D;
};

inline LinearSystem euler_system(const VectorXd& mass, const MatrixXd& C, const MatrixXd& K,
                                 double dt) {
  const auto n = mass.size();
  const MatrixXd Minv = mass.cwiseInverse().asDiagonal();
  const MatrixXd I = MatrixXd::Identity(n, n);
  LinearSystem s;
  s.A = MatrixXd::Zero(2 * n, 2 * n);
  s.A << I, dt * I, -dt * Minv * K, I - dt * Minv * C;
  s.B = MatrixXd::Zero(2 * n, n);
  s.B.bottomRows(n) = dt * Minv;
  s.H = MatrixXd::Zero(3 * n, 2 * n);
  s.H.topLeftCorner(n, n) = I;
  s.H.block(n, n, n, n) = I;
  s.H.bottomLeftCorner(n, n) = -Minv * K;
  s.H.bottomRightCorner(n, n) = -Minv * C;
  s.D = MatrixXd::Zero(3 * n, n);
  s.D.bottomRows(n) = Minv;
  return s;
}

/// Textbook Kalman filter with input feedthrough in the observation.
/// With `q_in_innovation` false the innovation and cross covariances are
/// formed from A P A^T alone, as happens when the measurement images reuse
/// the propagated points instead of points redrawn from the predicted
/// covariance.
struct KalmanFilter {
  LinearSystem sys;
  MatrixXd Q, R;
  VectorXd x;
  MatrixXd P;
  bool q_in_innovation = true;

  void step(const VectorXd& y, const VectorXd& u_prev, const VectorXd& u_now) {
    const VectorXd xp = sys.A * x + sys.B * u_prev;
    const MatrixXd spread = sys.A * P * sys.A.transpose();
    const MatrixXd Pp = spread + Q;
    const MatrixXd& Pi = q_in_innovation ? Pp : spread;
    const MatrixXd S = sys.H * Pi * sys.H.transpose() + R;
    const MatrixXd cross = Pi * sys.H.transpose();
    const MatrixXd G = cross * S.inverse();
    x = xp + G * (y - sys.H * xp - sys.D * u_now);
    P = Pp - G * cross.transpose();
  }
};

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline MatrixXd random_spd(int n, std::mt19937_64& rng, double lo = 0.1, double hi = 10.0) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> eig(lo, hi);
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  const MatrixXd q = qr.householderQ();
  VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = eig(rng);
  MatrixXd p = q * d.asDiagonal() * q.transpose();
  return 0.5 * (p + p.transpose());
}

/// Free response of m xdd + c xd + k x = 0 from (x0, 0), underdamped.
inline double damped_free_response(double m, double c, double k, double x0, double t) {
  const double wn = std::sqrt(k / m);
  const double zeta = c / (2.0 * std::sqrt(k * m));
  const double wd = wn * std::sqrt(1.0 - zeta * zeta);
  return x0 * std::exp(-zeta * wn * t) *
         (std::cos(wd * t) + zeta * wn / wd * std::sin(wd * t));
}

}  // namespace oracle
