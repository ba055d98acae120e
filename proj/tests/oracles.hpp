// Independent reference implementations used only by tests. Nothing here may
// call into the code paths it is checking.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Erlang-B by the standard recursion B(n) = rho*B(n-1) / (n + rho*B(n-1)).
inline double erlang_b(double rho, int servers) {
  double b = 1.0;
  for (int n = 1; n <= servers; ++n) b = rho * b / (n + rho * b);
  return b;
}

// Inverse of the normal tail via bisection directly on erfc.
inline double qinv_bisect(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Golden-section maximization on [lo, hi].
inline double golden_max(const std::function<double(double)>& f, double lo,
                         double hi, int iters = 200) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// Central finite differences.
inline double fd1(const std::function<double(double)>& f, double x,
                  double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}
inline double fd2(const std::function<double(double)>& f, double x,
                  double h = 1e-4) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// Projection of a Hermitian matrix onto the PSD cone by eigenvalue clipping.
inline Eigen::MatrixXcd psd_clip(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace oracles
