#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "phasecert/error.hpp"
#include "phasecert/matrix_core.hpp"

namespace phasecert {

/// Affine Hermitian-valued map x -> F0 + sum_i x_i F_i.
struct LinearMatrixPencil {
  ComplexMatrix constant;
  std::vector<ComplexMatrix> coefficients;

  Eigen::Index dim() const { return constant.rows(); }

  ComplexMatrix evaluate(const RealVector& x) const {
    ComplexMatrix out = constant;
    for (std::size_t i = 0; i < coefficients.size(); ++i) out += x(static_cast<Eigen::Index>(i)) * coefficients[i];
    return out;
  }
};

/// Linear equality weights . x = value removing the scaling ray of homogeneous systems.
struct Normalization {
  RealVector weights;
  double value = 1.0;
};

struct FeasibilityOptions {
  double eps_feas = 1e-8;
  double eps_sdp = 1e-7;
  // Return as soon as the sign of (t* - eps_feas) is known; bisection only needs that.
  bool stop_when_decided = false;
  int max_newton_steps = 3000;
  double radius = 1e6;  // ||z|| bound keeping the barrier problem bounded
};

struct FeasibilityResult {
  bool feasible = false;
  RealVector witness;
  double margin = -std::numeric_limits<double>::infinity();  // min_j lambda_min(F_j(witness))
  double optimum_upper = std::numeric_limits<double>::infinity();
  int newton_steps = 0;
};

namespace detail {

inline RealMatrix realify(const ComplexMatrix& h) {
  const Eigen::Index d = h.rows();
  RealMatrix out(2 * d, 2 * d);
  const RealMatrix re = h.real();
  const RealMatrix im = h.imag();
  out.topLeftCorner(d, d) = re;
  out.topRightCorner(d, d) = -im;
  out.bottomLeftCorner(d, d) = im;
  out.bottomRightCorner(d, d) = re;
  return 0.5 * (out + out.transpose());
}

// Realified constraint block S(z, t) = C + sum_i z_i E_i - t I.
struct RealBlock {
  RealMatrix constant;
  std::vector<RealMatrix> directions;
};

class BarrierSolver {
 public:
  BarrierSolver(std::vector<RealBlock> blocks, Eigen::Index vars, const FeasibilityOptions& opt)
      : blocks_(std::move(blocks)), vars_(vars), opt_(opt) {
    for (const RealBlock& b : blocks_) total_dim_ += static_cast<double>(b.constant.rows());
    total_dim_ += 1.0;  // ball constraint
  }

  struct Outcome {
    RealVector z;
    double t = 0.0;
    double gap = std::numeric_limits<double>::infinity();
    int steps = 0;
    bool decided = false;
    bool stalled = false;
  };

  Outcome solve() const {
    Outcome out;
    out.z = RealVector::Zero(vars_);
    out.t = min_eigenvalue(out.z) - 1.0;
    double s = 1.0;
    while (true) {
      const bool centered = center(out, s);
      if (opt_.stop_when_decided && out.t >= opt_.eps_feas) {
        out.decided = true;
        return out;
      }
      if (!centered) {
        out.stalled = out.gap > 1e3 * opt_.eps_sdp;
        return out;
      }
      out.gap = total_dim_ / s;
      if (opt_.stop_when_decided && out.t + 2.0 * out.gap < opt_.eps_feas) {
        out.decided = true;
        return out;
      }
      if (out.gap < opt_.eps_sdp) return out;
      s *= 8.0;
    }
  }

  double min_eigenvalue(const RealVector& z) const {
    double m = std::numeric_limits<double>::infinity();
    for (const RealBlock& b : blocks_) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(assemble(b, z, 0.0), Eigen::EigenvaluesOnly);
      m = std::min(m, es.eigenvalues()(0));
    }
    return m;
  }

  // One block's smallest eigenpair, used by the subgradient fallback.
  std::pair<double, RealVector> subgradient(const RealVector& z) const {
    double best = std::numeric_limits<double>::infinity();
    RealVector grad = RealVector::Zero(vars_);
    for (const RealBlock& b : blocks_) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(assemble(b, z, 0.0));
      if (es.eigenvalues()(0) < best) {
        best = es.eigenvalues()(0);
        const RealVector v = es.eigenvectors().col(0);
        for (Eigen::Index i = 0; i < vars_; ++i) grad(i) = v.dot(b.directions[static_cast<std::size_t>(i)] * v);
      }
    }
    return {best, grad};
  }

 private:
  static RealMatrix assemble(const RealBlock& b, const RealVector& z, double t) {
    RealMatrix s = b.constant;
    for (std::size_t i = 0; i < b.directions.size(); ++i) s += z(static_cast<Eigen::Index>(i)) * b.directions[i];
    s.diagonal().array() -= t;
    return s;
  }

  // Barrier value; nullopt outside the domain.
  std::optional<double> barrier(const RealVector& z, double t, double s) const {
    const double slack = opt_.radius * opt_.radius - z.squaredNorm();
    if (slack <= 0.0) return std::nullopt;
    double value = -s * t - std::log(slack);
    for (const RealBlock& b : blocks_) {
      Eigen::LLT<RealMatrix> llt(assemble(b, z, t));
      if (llt.info() != Eigen::Success) return std::nullopt;
      const RealMatrix& l = llt.matrixLLT();
      for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0)) return std::nullopt;
        value -= 2.0 * std::log(l(i, i));
      }
    }
    return value;
  }

  // Newton centering for parameter s; returns false when the line search stalls
  // or the step budget is exhausted.
  bool center(Outcome& st, double s) const {
    const Eigen::Index p = vars_;
    const Eigen::Index m = p + 1;
    for (int iter = 0; iter < 200; ++iter) {
      if (st.steps >= opt_.max_newton_steps) return false;
      RealVector grad = RealVector::Zero(m);
      RealMatrix hess = RealMatrix::Zero(m, m);
      grad(p) = -s;
      for (const RealBlock& b : blocks_) {
        const RealMatrix sm = assemble(b, st.z, st.t);
        Eigen::LLT<RealMatrix> llt(sm);
        const RealMatrix inv = llt.solve(RealMatrix::Identity(sm.rows(), sm.cols()));
        std::vector<RealMatrix> w(static_cast<std::size_t>(p));
        for (Eigen::Index i = 0; i < p; ++i) {
          w[static_cast<std::size_t>(i)] = inv * b.directions[static_cast<std::size_t>(i)];
          grad(i) -= w[static_cast<std::size_t>(i)].trace();
        }
        grad(p) += inv.trace();
        for (Eigen::Index i = 0; i < p; ++i) {
          const RealMatrix& wi = w[static_cast<std::size_t>(i)];
          for (Eigen::Index k = i; k < p; ++k) {
            const double v = (wi.array() * w[static_cast<std::size_t>(k)].transpose().array()).sum();
            hess(i, k) += v;
            if (k != i) hess(k, i) += v;
          }
          const double cross = -(wi.array() * inv.transpose().array()).sum();
          hess(i, p) += cross;
          hess(p, i) += cross;
        }
        hess(p, p) += inv.squaredNorm();
      }
      const double slack = opt_.radius * opt_.radius - st.z.squaredNorm();
      for (Eigen::Index i = 0; i < p; ++i) {
        grad(i) += 2.0 * st.z(i) / slack;
        hess(i, i) += 2.0 / slack;
      }
      hess.topLeftCorner(p, p) += 4.0 * st.z * st.z.transpose() / (slack * slack);

      const RealVector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement)) return false;
      if (decrement < 2e-10) return true;

      const std::optional<double> current = barrier(st.z, st.t, s);
      if (!current) return false;
      double alpha = 1.0;
      bool moved = false;
      while (alpha > 1e-14) {
        const RealVector z_new = st.z + alpha * step.head(p);
        const double t_new = st.t + alpha * step(p);
        const std::optional<double> trial = barrier(z_new, t_new, s);
        if (trial && *trial <= *current - 0.25 * alpha * decrement) {
          st.z = z_new;
          st.t = t_new;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      ++st.steps;
      if (!moved) return decrement < 1e-6;
      if (opt_.stop_when_decided && st.t >= opt_.eps_feas) return true;
    }
    return true;
  }

  std::vector<RealBlock> blocks_;
  Eigen::Index vars_;
  FeasibilityOptions opt_;
  double total_dim_ = 0.0;
};

}  // namespace detail

/// Maximizes t subject to F_j(x) >= t I for every pencil and the normalization.
/// feasible iff the attained margin reaches eps_feas.
inline FeasibilityResult feasibility(const std::vector<LinearMatrixPencil>& pencils,
                                     const Normalization& norm,
                                     const FeasibilityOptions& opt = {}) {
  if (pencils.empty()) throw Error(ErrorCode::InvalidParameter, "no constraint pencils");
  const Eigen::Index k = norm.weights.size();
  for (const LinearMatrixPencil& f : pencils) {
    if (static_cast<Eigen::Index>(f.coefficients.size()) != k) {
      throw Error(ErrorCode::DimensionMismatch, "pencil variable count differs from normalization");
    }
  }
  const double wnorm2 = norm.weights.squaredNorm();
  if (!(wnorm2 > 0.0)) throw Error(ErrorCode::InvalidParameter, "normalization functional is zero");

  // x = x0 + N z with N an orthonormal basis of the normalization's kernel.
  const RealVector x0 = norm.weights * (norm.value / wnorm2);
  RealMatrix null_basis(k, std::max<Eigen::Index>(k - 1, 0));
  if (k > 1) {
    Eigen::HouseholderQR<RealMatrix> qr(RealMatrix(norm.weights));
    const RealMatrix q = qr.householderQ() * RealMatrix::Identity(k, k);
    null_basis = q.rightCols(k - 1);
  }
  const Eigen::Index p = null_basis.cols();

  std::vector<detail::RealBlock> blocks;
  blocks.reserve(pencils.size());
  for (const LinearMatrixPencil& f : pencils) {
    detail::RealBlock b;
    b.constant = detail::realify(f.evaluate(x0));
    for (Eigen::Index i = 0; i < p; ++i) {
      ComplexMatrix dir = ComplexMatrix::Zero(f.dim(), f.dim());
      for (Eigen::Index l = 0; l < k; ++l) {
        if (null_basis(l, i) != 0.0) dir += null_basis(l, i) * f.coefficients[static_cast<std::size_t>(l)];
      }
      b.directions.push_back(detail::realify(dir));
    }
    blocks.push_back(std::move(b));
  }

  const detail::BarrierSolver solver(std::move(blocks), p, opt);
  detail::BarrierSolver::Outcome outcome = solver.solve();

  if (outcome.stalled) {
    // Subgradient ascent on lambda_min from the stalled iterate.
    RealVector z = outcome.z;
    double best = solver.min_eigenvalue(z);
    RealVector best_z = z;
    for (int iter = 1; iter <= 400 && best < opt.eps_feas; ++iter) {
      const auto [value, g] = solver.subgradient(z);
      if (value > best) {
        best = value;
        best_z = z;
      }
      const double gn = g.norm();
      if (gn == 0.0) break;
      z += (0.1 / std::sqrt(static_cast<double>(iter))) * g / gn;
    }
    if (best < opt.eps_feas) {
      throw Error(ErrorCode::SolverStall, "barrier iteration stalled before reaching the optimality gap");
    }
    outcome.z = best_z;
  }

  FeasibilityResult result;
  result.witness = x0 + null_basis * outcome.z;
  result.newton_steps = outcome.steps;
  result.optimum_upper = outcome.t + outcome.gap;
  double margin = std::numeric_limits<double>::infinity();
  for (const LinearMatrixPencil& f : pencils) margin = std::min(margin, lambda_min(f.evaluate(result.witness)));
  result.margin = margin;
  result.feasible = margin >= opt.eps_feas;
  return result;
}

struct BisectionResult {
  std::optional<double> value;  // nullopt when even the upper limit is infeasible
  FeasibilityResult witness;
  int solver_calls = 0;
};

/// Least parameter in [0, upper] at which a monotone feasibility oracle succeeds,
/// to within tol.
template <class Oracle>
BisectionResult gevp_bisection(Oracle&& feasible_at, double upper, double tol) {
  BisectionResult out;
  FeasibilityResult at_upper = feasible_at(upper);
  ++out.solver_calls;
  if (!at_upper.feasible) {
    out.witness = std::move(at_upper);
    return out;
  }
  FeasibilityResult at_zero = feasible_at(0.0);
  ++out.solver_calls;
  if (at_zero.feasible) {
    out.value = 0.0;
    out.witness = std::move(at_zero);
    return out;
  }
  double lo = 0.0;
  double hi = upper;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    FeasibilityResult r = feasible_at(mid);
    ++out.solver_calls;
    if (r.feasible) {
      hi = mid;
      at_upper = std::move(r);
    } else {
      lo = mid;
    }
  }
  out.value = hi;
  out.witness = std::move(at_upper);
  return out;
}

}  // namespace phasecert
