#pragma once

#include <Eigen/Dense>

namespace simcal {

struct EigenSolverOptions {
  double tolerance = 1e-12;       // on the phase-aligned change of the unit eigenvector
  int max_iterations = 500;
  double relative_shift = 1e-9;   // diagonal shift as a fraction of trace(A) / n
  int jacobi_max_dimension = 64;  // fallback allowed up to this size
};

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXcd vector;  // unit norm
  int iterations = 0;
  bool used_fallback = false;
};

/// Smallest eigenpair of a Hermitian positive semidefinite matrix. Inverse iteration on
/// A + delta I; if it does not converge, a cyclic Jacobi decomposition is used for
/// dimensions up to jacobi_max_dimension, otherwise EstimationError reports the iterations.
EigenPair smallest_eigenpair(const Eigen::MatrixXcd& a, const EigenSolverOptions& options = {});

struct JacobiResult {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXcd vectors;  // columns match values
  int sweeps = 0;
};

/// Full decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
JacobiResult jacobi_eigen(const Eigen::MatrixXcd& a, double tolerance = 1e-15, int max_sweeps = 100);

}  // namespace simcal
