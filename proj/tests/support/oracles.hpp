#pragma once

// Independent reference computations used to check the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "phasecert/matrix_core.hpp"
#include "support/random.hpp"

namespace phasecert::testing {

/// Support points of W(A) computed from scratch: for each direction the top
/// eigenvector of the rotated Hermitian part.
inline std::vector<Complex> support_polygon(const ComplexMatrix& a, int count) {
  std::vector<Complex> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double theta = 2.0 * kPi * k / count;
    const ComplexMatrix r = std::exp(Complex(0.0, -theta)) * a;
    const ComplexMatrix h = 0.5 * (r + r.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    const ComplexVector x = es.eigenvectors().col(h.rows() - 1);
    pts.push_back(x.dot(a * x));
  }
  return pts;
}

/// sup |arg z| over the polygon spanned by the support points. An edge that
/// crosses the negative real axis contributes pi.
inline double polygon_phase_sup(const std::vector<Complex>& pts, double zero_floor) {
  double best = 0.0;
  const std::size_t m = pts.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Complex p = pts[i];
    const Complex q = pts[(i + 1) % m];
    if (std::abs(p) > zero_floor) best = std::max(best, std::abs(std::arg(p)));
    if ((p.imag() > 0.0) != (q.imag() > 0.0) && p.imag() != q.imag()) {
      const double s = p.imag() / (p.imag() - q.imag());
      const double x = p.real() + s * (q.real() - p.real());
      if (x < -zero_floor) return kPi;
    }
  }
  return best;
}

/// sup |arg x^*Ax| over random unit vectors.
/// Boundary point of the numerical range supported in direction theta.
inline Complex support_point(const ComplexMatrix& a, double theta) {
  const ComplexMatrix r = std::exp(Complex(0.0, -theta)) * a;
  const ComplexMatrix h = 0.5 * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const ComplexVector x = es.eigenvectors().col(h.rows() - 1);
  return x.dot(a * x);
}

/// polygon_phase_sup followed by a golden-section search on the support
/// direction around the best vertex, so thin ranges are not underestimated.
inline double refined_phase_sup(const ComplexMatrix& a, int count, double zero_floor) {
  const std::vector<Complex> pts = support_polygon(a, count);
  const double coarse = polygon_phase_sup(pts, zero_floor);
  if (coarse >= kPi - 1e-12) return coarse;
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (std::abs(std::arg(pts[i])) > std::abs(std::arg(pts[best]))) best = i;
  }
  const double step = 2.0 * kPi / count;
  auto f = [&](double t) {
    const Complex z = support_point(a, t);
    return std::abs(z) > zero_floor ? std::abs(std::arg(z)) : 0.0;
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = step * static_cast<double>(best) - step, hi = lo + 2.0 * step;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return std::max({coarse, fc, fd});
}

inline double sampled_phase_sup(const ComplexMatrix& a, Rng& rng, int samples) {
  const double floor = 1e-12 * std::max(spectral_norm(a), 1e-300);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const ComplexMatrix x = random_unit_vector(rng, a.rows());
    const Complex z = (x.adjoint() * a * x)(0, 0);
    if (std::abs(z) > floor) best = std::max(best, std::abs(std::arg(z)));
  }
  return best;
}

/// Angular extent [min arg, max arg] of the numerical range measured relative to
/// a reference direction, from random samples plus the support polygon.
inline std::pair<double, double> angular_extent(const ComplexMatrix& a, double reference, Rng& rng,
                                                int samples, int polygon = 2000) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto take = [&](Complex z) {
    if (std::abs(z) < 1e-12) return;
    const double ang = reference + std::remainder(std::arg(z) - reference, 2.0 * kPi);
    lo = std::min(lo, ang);
    hi = std::max(hi, ang);
  };
  for (const Complex& z : support_polygon(a, polygon)) take(z);
  for (int s = 0; s < samples; ++s) {
    const ComplexMatrix x = random_unit_vector(rng, a.rows());
    take((x.adjoint() * a * x)(0, 0));
  }
  return {lo, hi};
}

}  // namespace phasecert::testing
