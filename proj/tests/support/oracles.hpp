#pragma once

// Numerical oracles for cross-checking parametrized map properties. These
// decompose plain value matrices and share no code with the tape-based
// construction they verify.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "nssm/matrix.hpp"
#include "nssm/rng.hpp"

namespace nssm::testing {

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

// Dominant eigenvalue modulus by plain power iteration. Reliable for
// positive matrices (Perron-Frobenius guarantees a simple positive
// dominant eigenvalue).
inline double power_iteration_dominant(const Matrix& a, int max_iters = 20000,
                                       double tol = 1e-13) {
  Rng rng(987654321);
  std::vector<double> x(a.rows());
  for (double& xi : x) xi = rng.uniform(0.1, 1.0);
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> y(a.rows(), 0.0);
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
    double norm = 0.0;
    for (double yi : y) norm += yi * yi;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (int i = 0; i < a.rows(); ++i) x[i] = y[i] / norm;
    if (std::abs(norm - lambda) < tol) return norm;
    lambda = norm;
  }
  return lambda;
}

inline std::vector<double> jacobi_singular_values(const Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
  std::vector<double> out(svd.singularValues().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = svd.singularValues()[static_cast<int>(i)];
  return out;
}

inline std::vector<double> eig_moduli(const Matrix& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(to_eigen(m), false);
  std::vector<double> out(m.rows());
  for (int i = 0; i < m.rows(); ++i) out[i] = std::abs(solver.eigenvalues()[i]);
  return out;
}

// Infinity norm of Q^T Q - I, computed by direct multiplication.
inline double orthogonality_error(const Matrix& q) {
  double worst = 0.0;
  for (int i = 0; i < q.cols(); ++i) {
    for (int j = 0; j < q.cols(); ++j) {
      double s = 0.0;
      for (int k = 0; k < q.rows(); ++k) s += q(k, i) * q(k, j);
      if (i == j) s -= 1.0;
      worst = std::max(worst, std::abs(s));
    }
  }
  return worst;
}

}  // namespace nssm::testing
