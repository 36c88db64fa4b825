#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "phasecert/error.hpp"
#include "phasecert/matrix_core.hpp"

namespace phasecert {

/// Block structure chi = (scalar dims, full dims). Scalar blocks b I_{n_k} come
/// first along the diagonal, followed by full blocks B_k of size m_k.
struct BlockDims {
  std::vector<int> scalar_dims;
  std::vector<int> full_dims;

  int size() const {
    return std::accumulate(scalar_dims.begin(), scalar_dims.end(), 0) +
           std::accumulate(full_dims.begin(), full_dims.end(), 0);
  }
  int block_count() const { return static_cast<int>(scalar_dims.size() + full_dims.size()); }
  bool operator==(const BlockDims&) const = default;
};

enum class StructureTarget { B_chi, D_chi };

struct StructuredBasis {
  std::vector<ComplexMatrix> basis;
  StructureTarget target = StructureTarget::B_chi;
};

inline bool validate(const BlockDims& chi, int n) {
  if (chi.block_count() == 0) return false;
  for (int d : chi.scalar_dims)
    if (d <= 0) return false;
  for (int d : chi.full_dims)
    if (d <= 0) return false;
  return chi.size() == n;
}

inline void require_compatible(const BlockDims& chi, Eigen::Index n) {
  if (!validate(chi, static_cast<int>(n))) {
    throw Error(ErrorCode::DimensionMismatch,
                "block structure of size " + std::to_string(chi.size()) +
                    " is not compatible with dimension " + std::to_string(n));
  }
}

namespace detail {

struct BlockSpan {
  int offset;
  int dim;
  bool scalar_in_b;  // true for the scalar blocks b I of B_chi (full blocks of D_chi)
};

inline std::vector<BlockSpan> block_spans(const BlockDims& chi) {
  std::vector<BlockSpan> spans;
  int offset = 0;
  for (int d : chi.scalar_dims) {
    spans.push_back({offset, d, true});
    offset += d;
  }
  for (int d : chi.full_dims) {
    spans.push_back({offset, d, false});
    offset += d;
  }
  return spans;
}

// Off-block entries vanish, and the blocks flagged scalar are multiples of identity.
inline bool matches_pattern(const BlockDims& chi, const ComplexMatrix& m, double tol,
                            bool scalar_where_b_scalar) {
  if (m.rows() != chi.size() || m.cols() != chi.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix size does not match the block structure");
  }
  const double bound = tol * std::max(spectral_norm(m), 1e-300);
  ComplexMatrix off = m;
  for (const BlockSpan& s : block_spans(chi)) {
    auto block = m.block(s.offset, s.offset, s.dim, s.dim);
    if (s.scalar_in_b == scalar_where_b_scalar) {
      const Complex mean = block.diagonal().mean();
      if ((block - mean * ComplexMatrix::Identity(s.dim, s.dim)).cwiseAbs().maxCoeff() > bound) {
        return false;
      }
    }
    off.block(s.offset, s.offset, s.dim, s.dim).setZero();
  }
  return off.size() == 0 || off.cwiseAbs().maxCoeff() <= bound;
}

inline void append_hermitian_block_basis(std::vector<ComplexMatrix>& out, int n, int offset, int dim) {
  for (int i = 0; i < dim; ++i) {
    ComplexMatrix e = ComplexMatrix::Zero(n, n);
    e(offset + i, offset + i) = 1.0;
    out.push_back(std::move(e));
  }
  for (int i = 0; i < dim; ++i) {
    for (int k = i + 1; k < dim; ++k) {
      ComplexMatrix e = ComplexMatrix::Zero(n, n);
      e(offset + i, offset + k) = 1.0;
      e(offset + k, offset + i) = 1.0;
      out.push_back(std::move(e));
    }
  }
  for (int i = 0; i < dim; ++i) {
    for (int k = i + 1; k < dim; ++k) {
      ComplexMatrix e = ComplexMatrix::Zero(n, n);
      e(offset + i, offset + k) = Complex(0.0, -1.0);
      e(offset + k, offset + i) = Complex(0.0, 1.0);
      out.push_back(std::move(e));
    }
  }
}

}  // namespace detail

/// M in B_chi: block diagonal with b_k I on the scalar blocks and arbitrary full blocks.
inline bool is_member_B(const BlockDims& chi, const ComplexMatrix& m, double tol = kDefaultTol) {
  return detail::matches_pattern(chi, m, tol, true);
}

/// M in D_chi: full blocks where B_chi has scalar blocks, d_k I where B_chi has full blocks.
inline bool is_member_D(const BlockDims& chi, const ComplexMatrix& m, double tol = kDefaultTol) {
  return detail::matches_pattern(chi, m, tol, false);
}

/// Canonical real basis of the Hermitian members of the target set, in block
/// order; within a full Hermitian block: diagonal units, symmetric pairs, then
/// imaginary antisymmetric pairs, each row-major.
inline StructuredBasis hermitian_basis(const BlockDims& chi, StructureTarget target) {
  const int n = chi.size();
  StructuredBasis out;
  out.target = target;
  for (const detail::BlockSpan& s : detail::block_spans(chi)) {
    const bool identity_block = (target == StructureTarget::B_chi) == s.scalar_in_b;
    if (identity_block) {
      ComplexMatrix e = ComplexMatrix::Zero(n, n);
      e.block(s.offset, s.offset, s.dim, s.dim).setIdentity();
      out.basis.push_back(std::move(e));
    } else {
      detail::append_hermitian_block_basis(out.basis, n, s.offset, s.dim);
    }
  }
  return out;
}

/// sum_i x_i E_i over a structured basis.
inline ComplexMatrix combine(const StructuredBasis& basis, const RealVector& x) {
  if (basis.basis.empty()) return ComplexMatrix();
  ComplexMatrix out = ComplexMatrix::Zero(basis.basis.front().rows(), basis.basis.front().cols());
  for (std::size_t i = 0; i < basis.basis.size(); ++i) out += x(static_cast<Eigen::Index>(i)) * basis.basis[i];
  return out;
}

/// Coordinates of a Hermitian member in the basis (least squares over entries).
inline RealVector coordinates(const StructuredBasis& basis, const ComplexMatrix& h) {
  const Eigen::Index k = static_cast<Eigen::Index>(basis.basis.size());
  RealVector x(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const ComplexMatrix& e = basis.basis[static_cast<std::size_t>(i)];
    x(i) = (e.adjoint() * h).trace().real() / (e.adjoint() * e).trace().real();
  }
  return x;
}

inline bool commutation_check(const BlockDims& chi, const ComplexMatrix& b, const ComplexMatrix& d,
                              double tol = kDefaultTol) {
  if (b.rows() != chi.size() || d.rows() != chi.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix size does not match the block structure");
  }
  return spectral_norm(d * b - b * d) <= tol * spectral_norm(b) * spectral_norm(d);
}

}  // namespace phasecert
