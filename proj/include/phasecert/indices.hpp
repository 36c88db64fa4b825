#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "phasecert/block_structure.hpp"
#include "phasecert/error.hpp"
#include "phasecert/lmi.hpp"
#include "phasecert/matrix_core.hpp"
#include "phasecert/numrange.hpp"

namespace phasecert {

inline constexpr double kIndexTol = 1e-7;
// arctan compresses the tail; nothing is gained past this angle per stage.
inline constexpr double kMaxStageAngle = 89.9 * kPi / 180.0;

struct MuUpperResult {
  double value = 0.0;
  ComplexMatrix witness_p;  // Hermitian positive definite member of D_chi
  int solver_calls = 0;
};

enum class PsiStage { PositiveDefiniteD, RotatedD, Vacuous };

inline std::string_view to_string(PsiStage s) {
  switch (s) {
    case PsiStage::PositiveDefiniteD: return "PositiveDefiniteD";
    case PsiStage::RotatedD: return "RotatedD";
    case PsiStage::Vacuous: return "Vacuous";
  }
  return "Unknown";
}

struct PsiUpperResult {
  double value = kPi;
  PsiStage stage = PsiStage::Vacuous;
  ComplexMatrix witness_d;
  double kappa = std::numeric_limits<double>::infinity();
  int solver_calls = 0;
};

struct PsiLowerResult {
  double value = 0.0;
  RealVector witness_x;
  Complex witness_eig{1.0, 0.0};
  int restarts_used = 0;
};

namespace detail {

inline bool is_zero(const ComplexMatrix& a) { return a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0; }

inline Normalization trace_normalization(const std::vector<ComplexMatrix>& basis, Eigen::Index extra,
                                         double value) {
  Normalization norm;
  norm.weights = RealVector::Zero(static_cast<Eigen::Index>(basis.size()) + extra);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    norm.weights(static_cast<Eigen::Index>(i)) = basis[i].trace().real();
  }
  norm.value = value;
  return norm;
}

inline LinearMatrixPencil zero_pencil(Eigen::Index n) {
  LinearMatrixPencil f;
  f.constant = ComplexMatrix::Zero(n, n);
  return f;
}

// D >= t, kappa Re(AD) -/+ Im(AD) >= t over Hermitian D in D_chi.
inline std::vector<LinearMatrixPencil> positive_d_system(const ComplexMatrix& a,
                                                         const std::vector<ComplexMatrix>& basis,
                                                         double kappa) {
  const Eigen::Index n = a.rows();
  std::vector<LinearMatrixPencil> out{zero_pencil(n), zero_pencil(n), zero_pencil(n)};
  for (const ComplexMatrix& e : basis) {
    const ComplexMatrix ae = a * e;
    const ComplexMatrix re = real_part(ae);
    const ComplexMatrix im = imag_part(ae);
    out[0].coefficients.push_back(e);
    out[1].coefficients.push_back(kappa * re - im);
    out[2].coefficients.push_back(kappa * re + im);
  }
  return out;
}

// D = H + jK with H, K Hermitian in D_chi: H >= t, Re(AD) >= t, kappa H -/+ K >= t.
inline std::vector<LinearMatrixPencil> rotated_d_system(const ComplexMatrix& a,
                                                        const std::vector<ComplexMatrix>& basis,
                                                        double kappa) {
  const Eigen::Index n = a.rows();
  std::vector<LinearMatrixPencil> out{zero_pencil(n), zero_pencil(n), zero_pencil(n), zero_pencil(n)};
  const ComplexMatrix zero = ComplexMatrix::Zero(n, n);
  for (const ComplexMatrix& e : basis) {
    out[0].coefficients.push_back(e);
    out[1].coefficients.push_back(real_part(a * e));
    out[2].coefficients.push_back(kappa * e);
    out[3].coefficients.push_back(kappa * e);
  }
  for (const ComplexMatrix& e : basis) {
    out[0].coefficients.push_back(zero);
    out[1].coefficients.push_back(real_part(kJ * (a * e)));
    out[2].coefficients.push_back(-e);
    out[3].coefficients.push_back(e);
  }
  return out;
}

inline ComplexMatrix combine(const std::vector<ComplexMatrix>& basis, const RealVector& x, Eigen::Index offset = 0) {
  ComplexMatrix out = ComplexMatrix::Zero(basis.front().rows(), basis.front().cols());
  for (std::size_t i = 0; i < basis.size(); ++i) out += x(offset + static_cast<Eigen::Index>(i)) * basis[i];
  return out;
}

inline FeasibilityOptions bisection_options() {
  FeasibilityOptions opt;
  opt.stop_when_decided = true;
  return opt;
}

}  // namespace detail

/// D-scaling upper bound on the structured singular value: the least gamma with
/// P in D_chi, P > 0 and gamma^2 P - A^* P A >= 0, refined by the exact norm of
/// the scaled matrix at the witness.
inline MuUpperResult mu_upper(const ComplexMatrix& a, const BlockDims& chi, double tol = kIndexTol) {
  require_square(a, "mu_upper input");
  require_compatible(chi, a.rows());
  const Eigen::Index n = a.rows();
  MuUpperResult out;
  out.witness_p = ComplexMatrix::Identity(n, n);
  const double scale = spectral_norm(a);
  if (detail::is_zero(a)) return out;
  out.value = scale;

  const ComplexMatrix an = a / scale;
  const std::vector<ComplexMatrix> basis = hermitian_basis(chi, StructureTarget::D_chi).basis;
  const Normalization norm = detail::trace_normalization(basis, 0, static_cast<double>(n));
  const FeasibilityOptions opt = detail::bisection_options();

  const BisectionResult b = gevp_bisection(
      [&](double gamma) {
        std::vector<LinearMatrixPencil> sys{detail::zero_pencil(n), detail::zero_pencil(n)};
        for (const ComplexMatrix& e : basis) {
          sys[0].coefficients.push_back(e);
          const ComplexMatrix q = gamma * gamma * e - an.adjoint() * e * an;
          sys[1].coefficients.push_back(real_part(q));
        }
        return feasibility(sys, norm, opt);
      },
      1.0 + 1e-3, tol);
  out.solver_calls = b.solver_calls;
  if (!b.value) return out;

  const ComplexMatrix p = detail::combine(basis, b.witness.witness);
  const ComplexMatrix root = hermitian_sqrt(p);
  const ComplexMatrix inv_root = hermitian_inv_sqrt(p);
  const double scaled_norm = spectral_norm(root * an * inv_root);
  const double best = std::min(*b.value, scaled_norm);
  if (best < 1.0) {
    out.value = best * scale;
    out.witness_p = p / (p.trace().real() / static_cast<double>(n));
  }
  return out;
}

/// Two-stage D-scaling upper bound on the structured phase index: a positive
/// definite scaling certifies values below pi/2, a rotated scaling values up to pi.
inline PsiUpperResult psi_upper(const ComplexMatrix& a, const BlockDims& chi, double tol = kIndexTol) {
  require_square(a, "psi_upper input");
  require_compatible(chi, a.rows());
  const Eigen::Index n = a.rows();
  PsiUpperResult out;
  if (detail::is_zero(a)) {
    out.value = 0.0;
    out.stage = PsiStage::PositiveDefiniteD;
    out.kappa = 0.0;
    out.witness_d = ComplexMatrix::Identity(n, n);
    return out;
  }
  const ComplexMatrix an = a / spectral_norm(a);
  const std::vector<ComplexMatrix> basis = hermitian_basis(chi, StructureTarget::D_chi).basis;
  const FeasibilityOptions opt = detail::bisection_options();
  const double nd = static_cast<double>(n);

  const Normalization norm1 = detail::trace_normalization(basis, 0, nd);
  const BisectionResult s1 = gevp_bisection(
      [&](double angle) { return feasibility(detail::positive_d_system(an, basis, std::tan(angle)), norm1, opt); },
      kMaxStageAngle, tol);
  out.solver_calls += s1.solver_calls;
  if (s1.value) {
    out.stage = PsiStage::PositiveDefiniteD;
    out.value = *s1.value;
    out.kappa = std::tan(*s1.value);
    out.witness_d = detail::combine(basis, s1.witness.witness);
    return out;
  }

  const Eigen::Index p = static_cast<Eigen::Index>(basis.size());
  const Normalization norm2 = detail::trace_normalization(basis, p, nd);
  const BisectionResult s2 = gevp_bisection(
      [&](double angle) { return feasibility(detail::rotated_d_system(an, basis, std::tan(angle)), norm2, opt); },
      kMaxStageAngle, tol);
  out.solver_calls += s2.solver_calls;
  if (s2.value) {
    out.stage = PsiStage::RotatedD;
    out.value = 0.5 * kPi + *s2.value;
    out.kappa = std::tan(*s2.value);
    out.witness_d = detail::combine(basis, s2.witness.witness) + kJ * detail::combine(basis, s2.witness.witness, p);
    return out;
  }
  return out;
}

/// First-order change of a simple eigenvalue: (v^* dA u) / (v^* u).
inline Complex eig_derivative(const ComplexVector& u, const ComplexVector& v, const ComplexMatrix& da) {
  const Complex overlap = v.dot(u);
  if (std::abs(overlap) < 1e-10 * u.norm() * v.norm()) {
    throw Error(ErrorCode::IllConditionedPair, "left and right eigenvectors are nearly orthogonal");
  }
  return v.dot(da * u) / overlap;
}

/// Derivative of the eigenvalue of A closest to lambda in direction dA.
inline Complex eig_derivative(const ComplexMatrix& a, Complex lambda, const ComplexMatrix& da) {
  require_square(a, "eig_derivative input");
  if (da.rows() != a.rows() || da.cols() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "perturbation size differs from the matrix");
  }
  const GeneralEigen e = eig_general(a);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < e.eigenvalues.size(); ++i) {
    if (std::abs(e.eigenvalues(i) - lambda) < std::abs(e.eigenvalues(best) - lambda)) best = i;
  }
  if (!e.simple[static_cast<std::size_t>(best)]) {
    throw Error(ErrorCode::NonSimpleEigenvalue, "eigenvalue is not simple");
  }
  return eig_derivative(e.right_vectors.col(best), e.left_vectors.col(best), da);
}

namespace detail {

struct PhaseObjective {
  double value = 0.0;
  Complex lambda{1.0, 0.0};
  Eigen::Index index = -1;  // -1 when no eigenvalue clears the modulus floor
};

// Eigenvalue of largest absolute phase; ties go to the larger modulus, then
// lexicographic on (Re, Im).
inline PhaseObjective select_lambda_star(const ComplexVector& eigenvalues, double floor) {
  PhaseObjective best;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const Complex z = eigenvalues(i);
    if (std::abs(z) <= floor) continue;
    const double phase = std::abs(std::arg(z));
    bool take = best.index < 0 || phase > best.value + 1e-10;
    if (!take && std::abs(phase - best.value) <= 1e-10) {
      const double ma = std::abs(z);
      const double mb = std::abs(best.lambda);
      if (ma > mb * (1.0 + 1e-12)) {
        take = true;
      } else if (std::abs(ma - mb) <= 1e-12 * mb) {
        take = z.real() > best.lambda.real() ||
               (z.real() == best.lambda.real() && z.imag() > best.lambda.imag());
      }
    }
    if (take) {
      best.value = phase;
      best.lambda = z;
      best.index = i;
    }
  }
  return best;
}

class LowerBoundProblem {
 public:
  LowerBoundProblem(const ComplexMatrix& a, std::vector<ComplexMatrix> basis)
      : a_(a), basis_(std::move(basis)) {}

  Eigen::Index dim() const { return static_cast<Eigen::Index>(basis_.size()); }

  ComplexMatrix scaling(const RealVector& x) const { return combine(basis_, x); }

  ComplexMatrix scaled(const RealVector& x) const {
    const ComplexMatrix xm = scaling(x);
    return xm * a_ * xm;
  }

  PhaseObjective evaluate(const RealVector& x) const {
    const ComplexMatrix s = scaled(x);
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(s, false);
    return select_lambda_star(solver.eigenvalues(), 1e-10 * spectral_norm(s));
  }

  // Gradient of |angle lambda_star|; false when lambda_star is not simple.
  bool gradient(const RealVector& x, PhaseObjective& obj, RealVector& grad) const {
    const ComplexMatrix xm = scaling(x);
    const ComplexMatrix s = xm * a_ * xm;
    const GeneralEigen e = eig_general(s);
    obj = select_lambda_star(e.eigenvalues, 1e-10 * spectral_norm(s));
    if (obj.index < 0 || !e.simple[static_cast<std::size_t>(obj.index)]) return false;
    const ComplexVector u = e.right_vectors.col(obj.index);
    const ComplexVector v = e.left_vectors.col(obj.index);
    const Complex lambda = obj.lambda;
    const double angle = std::arg(lambda);
    const double sign = angle > 0.0 ? 1.0 : (angle < 0.0 ? -1.0 : 0.0);
    const double mod2 = std::norm(lambda);
    const double df_dre = -sign * lambda.imag() / mod2;
    const double df_dim = sign * lambda.real() / mod2;
    const ComplexMatrix ax = a_ * xm;
    const ComplexMatrix xa = xm * a_;
    grad.resize(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      const ComplexMatrix& xi = basis_[static_cast<std::size_t>(i)];
      Complex dl;
      try {
        dl = eig_derivative(u, v, xi * ax + xa * xi);
      } catch (const Error&) {
        return false;
      }
      grad(i) = df_dre * dl.real() + df_dim * dl.imag();
    }
    return true;
  }

 private:
  ComplexMatrix a_;
  std::vector<ComplexMatrix> basis_;
};

struct AscentOutcome {
  RealVector x;
  PhaseObjective objective;
};

// Projected gradient ascent on the unit sphere (f is invariant under x -> c x).
inline AscentOutcome ascend(const LowerBoundProblem& prob, RealVector x, std::mt19937_64& rng) {
  x /= x.norm();
  PhaseObjective obj = prob.evaluate(x);
  double step = 0.5;
  int perturbations = 0;
  std::normal_distribution<double> gauss;
  for (int iter = 0; iter < 300; ++iter) {
    if (obj.value >= kPi - 1e-15) break;
    RealVector g;
    PhaseObjective at;
    if (!prob.gradient(x, at, g)) {
      if (++perturbations > 20) break;
      RealVector noise(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) noise(i) = gauss(rng);
      RealVector trial = x + 1e-8 * noise;
      trial /= trial.norm();
      const PhaseObjective moved = prob.evaluate(trial);
      if (moved.index >= 0 && moved.value >= obj.value - 1e-12) {
        x = trial;
        obj = moved;
      }
      continue;
    }
    obj = at;
    g -= x * x.dot(g);
    const double gn2 = g.squaredNorm();
    if (gn2 < 1e-24) break;
    double gain = -1.0;
    for (double alpha = step; alpha > 1e-14; alpha *= 0.5) {
      RealVector trial = x + alpha * g;
      trial /= trial.norm();
      const PhaseObjective cand = prob.evaluate(trial);
      if (cand.index >= 0 && cand.value >= obj.value + 1e-4 * alpha * gn2) {
        gain = cand.value - obj.value;
        x = trial;
        obj = cand;
        step = std::min(4.0, 2.0 * alpha);
        break;
      }
    }
    if (gain < 1e-14) break;
  }
  return {x, obj};
}

}  // namespace detail

/// Lower bound on the structured phase index: the largest eigenvalue phase of
/// X A X over Hermitian X in B_chi, by multi-start gradient ascent from X = I.
inline PsiLowerResult psi_lower(const ComplexMatrix& a, const BlockDims& chi, int restarts = 8,
                                std::uint64_t seed = 0x9e3779b97f4a7c15ULL) {
  require_square(a, "psi_lower input");
  require_compatible(chi, a.rows());
  if (restarts < 1) throw Error(ErrorCode::InvalidParameter, "psi_lower needs at least one start");
  const StructuredBasis sb = hermitian_basis(chi, StructureTarget::B_chi);
  PsiLowerResult best;
  best.witness_x = coordinates(sb, ComplexMatrix::Identity(a.rows(), a.cols()));
  if (detail::is_zero(a)) return best;

  const double scale = spectral_norm(a);
  const detail::LowerBoundProblem prob(a / scale, sb.basis);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  bool have = false;
  for (int start = 0; start < restarts; ++start) {
    RealVector x0;
    if (start == 0) {
      x0 = coordinates(sb, ComplexMatrix::Identity(a.rows(), a.cols()));
    } else {
      x0.resize(prob.dim());
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) = gauss(rng);
    }
    const detail::AscentOutcome r = detail::ascend(prob, x0, rng);
    best.restarts_used = start + 1;
    if (r.objective.index >= 0 && (!have || r.objective.value > best.value)) {
      have = true;
      best.value = r.objective.value;
      best.witness_x = r.x;
      best.witness_eig = r.objective.lambda * scale;
    }
    if (best.value >= kPi - 1e-15) break;
  }
  if (!have) {
    // Spectral bound: every start collapsed below the modulus floor.
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, false);
    const detail::PhaseObjective s = detail::select_lambda_star(solver.eigenvalues(), 1e-10 * spectral_norm(a));
    best.value = s.index >= 0 ? s.value : 0.0;
    best.witness_eig = s.lambda;
  }
  return best;
}

/// Gradient of |angle lambda_star(X A X)| with respect to the coordinates of X
/// in the Hermitian B_chi basis; nullopt where lambda_star is not simple.
inline std::optional<RealVector> psi_lower_gradient(const ComplexMatrix& a, const BlockDims& chi,
                                                    const RealVector& x) {
  require_compatible(chi, a.rows());
  const detail::LowerBoundProblem prob(a, hermitian_basis(chi, StructureTarget::B_chi).basis);
  detail::PhaseObjective obj;
  RealVector grad;
  if (!prob.gradient(x, obj, grad)) return std::nullopt;
  return grad;
}

/// Scattering matrix (I - M)(I + M)^{-1}.
inline ComplexMatrix scattering(const ComplexMatrix& m) {
  require_square(m, "scattering input");
  const Eigen::Index n = m.rows();
  const ComplexMatrix ipm = ComplexMatrix::Identity(n, n) + m;
  Eigen::JacobiSVD<ComplexMatrix> svd(ipm);
  const auto& s = svd.singularValues();
  if (!(s(n - 1) > 0.0) || s(0) / s(n - 1) > 1e12) {
    throw Error(ErrorCode::SingularScattering, "I + M is numerically singular");
  }
  return (ComplexMatrix::Identity(n, n) - m) * ipm.inverse();
}

/// Relative passivity index: D-scaling upper bound on mu of the scattering matrix.
inline double relative_passivity(const ComplexMatrix& m, const BlockDims& chi, double tol = kIndexTol) {
  return mu_upper(scattering(m), chi, tol).value;
}

}  // namespace phasecert
