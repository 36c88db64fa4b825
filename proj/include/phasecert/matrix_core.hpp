#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "phasecert/error.hpp"

namespace phasecert {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Complex kJ{0.0, 1.0};

struct HermitianEigen {
  RealVector eigenvalues;     // ascending
  ComplexMatrix eigenvectors; // columns, unitary
};

struct GeneralEigen {
  ComplexVector eigenvalues;
  ComplexMatrix right_vectors;
  ComplexMatrix left_vectors;
  // simple[i] is false when eigenvalue i lies within the cluster gap of another.
  std::vector<bool> simple;
};

/// Largest singular value.
inline double spectral_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  return svd.singularValues()(0);
}

inline double smallest_singular_value(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

inline void require_square(const ComplexMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be square");
  }
}

/// Splits A into its Hermitian and skew-Hermitian parts: A = H + jK.
inline std::pair<ComplexMatrix, ComplexMatrix> hermitian_parts(const ComplexMatrix& a) {
  require_square(a, "hermitian_parts input");
  const ComplexMatrix adj = a.adjoint();
  ComplexMatrix h = (a + adj) * 0.5;
  ComplexMatrix k = (a - adj) * Complex(0.0, -0.5);
  return {std::move(h), std::move(k)};
}

inline ComplexMatrix real_part(const ComplexMatrix& a) { return (a + a.adjoint()) * 0.5; }
inline ComplexMatrix imag_part(const ComplexMatrix& a) { return (a - a.adjoint()) * Complex(0.0, -0.5); }

inline bool is_hermitian(const ComplexMatrix& h, double tol = kDefaultTol) {
  if (h.rows() != h.cols()) return false;
  return (h - h.adjoint()).norm() <= tol * spectral_norm(h);
}

inline HermitianEigen eig_hermitian(const ComplexMatrix& h, double tol = kDefaultTol) {
  require_square(h, "eig_hermitian input");
  const double scale = spectral_norm(h);
  if ((h - h.adjoint()).norm() > tol * scale) {
    throw Error(ErrorCode::NotHermitian, "matrix deviates from its adjoint");
  }
  const ComplexMatrix sym = (h + h.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "Hermitian eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Eigenvalues only, symmetrizing the input first; used on hot paths where the
/// argument is Hermitian by construction.
inline RealVector hermitian_eigenvalues(const ComplexMatrix& h) {
  if (h.size() == 0) return RealVector(0);
  const ComplexMatrix sym = (h + h.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline double lambda_min(const ComplexMatrix& h) {
  if (h.size() == 0) return std::numeric_limits<double>::infinity();
  return hermitian_eigenvalues(h)(0);
}

inline double lambda_max(const ComplexMatrix& h) {
  if (h.size() == 0) return -std::numeric_limits<double>::infinity();
  const RealVector ev = hermitian_eigenvalues(h);
  return ev(ev.size() - 1);
}

/// Null vector of (A - lambda I)^*, i.e. a left eigenvector v with v^* A = lambda v^*.
inline ComplexVector left_null_vector(const ComplexMatrix& a, Complex lambda) {
  const Eigen::Index n = a.rows();
  const ComplexMatrix shifted = (a - lambda * ComplexMatrix::Identity(n, n)).adjoint();
  Eigen::JacobiSVD<ComplexMatrix> svd(shifted, Eigen::ComputeFullV);
  return svd.matrixV().col(n - 1);
}

/// Full spectrum with right and left eigenvectors. Eigenvalues separated from
/// every other eigenvalue by less than cluster_gap * ||A|| are flagged non-simple.
inline GeneralEigen eig_general(const ComplexMatrix& a, double cluster_gap = 1e-8) {
  require_square(a, "eig_general input");
  const Eigen::Index n = a.rows();
  GeneralEigen out;
  if (n == 0) return out;
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "eigensolver hit its iteration cap");
  }
  out.eigenvalues = solver.eigenvalues();
  out.right_vectors = solver.eigenvectors();
  out.left_vectors = ComplexMatrix::Zero(n, n);
  out.simple.assign(static_cast<std::size_t>(n), true);

  const double scale = std::max(spectral_norm(a), std::numeric_limits<double>::min());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != i && std::abs(out.eigenvalues(i) - out.eigenvalues(k)) < cluster_gap * scale) {
        out.simple[static_cast<std::size_t>(i)] = false;
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    ComplexVector u = out.right_vectors.col(i);
    u /= u.norm();
    out.right_vectors.col(i) = u;
    ComplexVector v = left_null_vector(a, out.eigenvalues(i));
    const Complex overlap = v.dot(u);  // v^* u
    if (std::abs(overlap) > 0.0) v *= overlap / std::abs(overlap);
    out.left_vectors.col(i) = v;
  }
  return out;
}

/// Generalized eigenvalues of the Hermitian-definite pencil M x = lambda P x, ascending.
inline RealVector gevp_hermitian_definite(const ComplexMatrix& m, const ComplexMatrix& p,
                                          double tol = kDefaultTol) {
  require_square(m, "pencil matrix M");
  require_square(p, "pencil matrix P");
  if (m.rows() != p.rows()) throw Error(ErrorCode::DimensionMismatch, "pencil sizes differ");
  const ComplexMatrix ps = (p + p.adjoint()) * 0.5;
  const double scale = std::max(spectral_norm(ps), std::numeric_limits<double>::min());
  if (lambda_min(ps) < tol * scale) {
    throw Error(ErrorCode::NotDefinite, "pencil matrix P is not positive definite with margin");
  }
  Eigen::LLT<ComplexMatrix> llt(ps);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotDefinite, "Cholesky of P failed");
  const ComplexMatrix l = llt.matrixL();
  const ComplexMatrix linv_m = l.triangularView<Eigen::Lower>().solve((m + m.adjoint()) * 0.5);
  const ComplexMatrix reduced =
      l.triangularView<Eigen::Lower>().solve(linv_m.adjoint()).adjoint();
  return hermitian_eigenvalues(reduced);
}

/// Principal square root of a Hermitian positive semidefinite matrix.
inline ComplexMatrix hermitian_sqrt(const ComplexMatrix& h) {
  const HermitianEigen e = eig_hermitian(h, 1e-6);
  const RealVector s = e.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return e.eigenvectors * s.cast<Complex>().asDiagonal() * e.eigenvectors.adjoint();
}

inline ComplexMatrix hermitian_inv_sqrt(const ComplexMatrix& h) {
  const HermitianEigen e = eig_hermitian(h, 1e-6);
  if (e.eigenvalues(0) <= 0.0) throw Error(ErrorCode::NotDefinite, "inverse square root of a singular matrix");
  const RealVector s = e.eigenvalues.cwiseSqrt().cwiseInverse();
  return e.eigenvectors * s.cast<Complex>().asDiagonal() * e.eigenvectors.adjoint();
}

inline ComplexMatrix block_diagonal(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out = ComplexMatrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) {
  double w = std::remainder(angle, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

}  // namespace phasecert
