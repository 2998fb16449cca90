#include "simcal/hermitian_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "simcal/common.hpp"

namespace simcal {

namespace {

void check_square(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw EstimationError("eigen solver: matrix must be square and non-empty");
  if (!a.allFinite()) throw EstimationError("eigen solver: non-finite matrix entries");
}

// Aligns v to the phase of reference so consecutive iterates are comparable.
Eigen::VectorXcd phase_aligned(const Eigen::VectorXcd& v, const Eigen::VectorXcd& reference) {
  const cplx dot = reference.dot(v);  // reference^H v
  if (std::abs(dot) == 0.0) return v;
  return v * (std::conj(dot) / std::abs(dot));
}

}  // namespace

JacobiResult jacobi_eigen(const Eigen::MatrixXcd& input, double tolerance, int max_sweeps) {
  check_square(input);
  const Eigen::Index n = input.rows();
  Eigen::MatrixXcd a = 0.5 * (input + input.adjoint());
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    }
    if (std::sqrt(off) <= tolerance * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag <= 1e-300) continue;
        const cplx phase = a(p, q) / mag;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // U = diag(1, conj(phase)) * [[c, s], [-s, c]] on (p, q).
        const cplx upp = c;
        const cplx upq = s;
        const cplx uqp = -s * std::conj(phase);
        const cplx uqq = c * std::conj(phase);
        for (Eigen::Index i = 0; i < n; ++i) {
          const cplx aip = a(i, p);
          const cplx aiq = a(i, q);
          a(i, p) = aip * upp + aiq * uqp;
          a(i, q) = aip * upq + aiq * uqq;
        }
        for (Eigen::Index j = 0; j < n; ++j) {
          const cplx apj = a(p, j);
          const cplx aqj = a(q, j);
          a(p, j) = std::conj(upp) * apj + std::conj(uqp) * aqj;
          a(q, j) = std::conj(upq) * apj + std::conj(uqq) * aqj;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (Eigen::Index i = 0; i < n; ++i) {
          const cplx vip = v(i, p);
          const cplx viq = v(i, q);
          v(i, p) = vip * upp + viq * uqp;
          v(i, q) = vip * upq + viq * uqq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i).real() < a(j, j).real(); });
  JacobiResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[i], order[i]).real();
    out.vectors.col(i) = v.col(order[i]);
  }
  out.sweeps = sweep;
  return out;
}

EigenPair smallest_eigenpair(const Eigen::MatrixXcd& input, const EigenSolverOptions& options) {
  check_square(input);
  const Eigen::Index n = input.rows();
  const Eigen::MatrixXcd a = 0.5 * (input + input.adjoint());
  const double trace = std::max(a.trace().real(), 0.0);
  const double delta = std::max(options.relative_shift * trace / static_cast<double>(n), 1e-300);

  EigenPair out;
  if (n == 1) {
    out.value = a(0, 0).real();
    out.vector = Eigen::VectorXcd::Ones(1);
    return out;
  }

  const Eigen::MatrixXcd shifted = a + delta * Eigen::MatrixXcd::Identity(n, n);
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(shifted);
  bool converged = false;
  Eigen::VectorXcd x(n);
  if (ldlt.info() == Eigen::Success) {
    // Deterministic start with no special alignment to any eigenvector.
    for (Eigen::Index i = 0; i < n; ++i) x(i) = cplx(1.0 + 0.37 * static_cast<double>(i), 0.21 * static_cast<double>(i % 3));
    x.normalize();
    for (int it = 1; it <= options.max_iterations; ++it) {
      Eigen::VectorXcd y = ldlt.solve(x);
      const double norm = y.norm();
      if (!std::isfinite(norm) || norm == 0.0) break;
      y /= norm;
      y = phase_aligned(y, x);
      const double change = (y - x).norm();
      x = y;
      out.iterations = it;
      if (change < options.tolerance) {
        converged = true;
        break;
      }
    }
  }

  if (converged) {
    out.vector = x;
    out.value = (x.adjoint() * a * x)(0, 0).real();
    return out;
  }
  if (n > options.jacobi_max_dimension) {
    throw EstimationError("eigen solver: inverse iteration did not converge after " + std::to_string(out.iterations) +
                          " iterations (dimension " + std::to_string(n) + ")");
  }
  const JacobiResult full = jacobi_eigen(a);
  out.value = full.values(0);
  out.vector = full.vectors.col(0).normalized();
  out.used_fallback = true;
  return out;
}

}  // namespace simcal
