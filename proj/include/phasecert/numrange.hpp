#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "phasecert/error.hpp"
#include "phasecert/matrix_core.hpp"

namespace phasecert {

enum class Sectoriality { Sectorial, QuasiSectorial, SemiSectorial, NonSemiSectorial };

inline std::string_view to_string(Sectoriality s) {
  switch (s) {
    case Sectoriality::Sectorial: return "Sectorial";
    case Sectoriality::QuasiSectorial: return "QuasiSectorial";
    case Sectoriality::SemiSectorial: return "SemiSectorial";
    case Sectoriality::NonSemiSectorial: return "NonSemiSectorial";
  }
  return "Unknown";
}

inline constexpr double kSectorialityTol = 1e-8;

struct PhaseSpectrum {
  Sectoriality sectoriality = Sectoriality::Sectorial;
  std::vector<double> phases;  // descending, radians
  double center = 0.0;
  double field_angle = 0.0;
  double phase_index = 0.0;
  int rank_deficiency = 0;

  double max_phase() const { return phases.front(); }
  double min_phase() const { return phases.back(); }
};

/// lambda_min(Re(e^{-j theta} A)); positive iff W(A) lies in the open half-plane
/// {Re(e^{-j theta} z) > 0}.
inline double support_min(const ComplexMatrix& a, double theta) {
  return lambda_min(real_part(std::exp(Complex(0.0, -theta)) * a));
}

namespace detail {

struct SupportScan {
  double theta = 0.0;  // maximizing rotation (plateau midpoint when g is flat at 0)
  double value = 0.0;  // max_theta support_min(A, theta)
  double scale = 0.0;  // ||A||
};

// Maximizes g(theta) = support_min(A, theta) by a 720-point grid followed by a
// golden-section refinement around the best grid point.
inline SupportScan scan_support(const ComplexMatrix& a, double tol) {
  constexpr int kGrid = 720;
  const double step = 2.0 * kPi / kGrid;
  std::vector<double> g(kGrid);
  int best = 0;
  for (int k = 0; k < kGrid; ++k) {
    g[k] = support_min(a, -kPi + step * k);
    if (g[k] > g[best]) best = k;
  }

  auto f = [&](double t) { return support_min(a, t); };
  double lo = -kPi + step * (best - 1);
  double hi = -kPi + step * (best + 1);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    }
  }
  SupportScan scan;
  scan.scale = spectral_norm(a);
  scan.theta = 0.5 * (lo + hi);
  scan.value = f(scan.theta);
  if (g[best] > scan.value) {
    scan.theta = -kPi + step * best;
    scan.value = g[best];
  }

  // On a flat plateau (quasi-sectorial with 0 at a sharp point) pick the arc
  // midpoint so the rotated Hermitian part is positive off the kernel.
  const double band = tol * scan.scale;
  if (std::abs(scan.value) <= band) {
    int left = 0;
    while (left < kGrid - 1 && g[(best - left - 1 + kGrid) % kGrid] >= -band) ++left;
    int right = 0;
    while (right < kGrid - 1 && g[(best + right + 1) % kGrid] >= -band) ++right;
    if (left + right > 0 && left + right < kGrid - 1) {
      scan.theta = wrap_angle(-kPi + step * (best + 0.5 * (right - left)));
    }
  }
  scan.theta = wrap_angle(scan.theta);
  return scan;
}

struct Deflation {
  bool ok = false;
  ComplexMatrix reduced;  // sectorial part, expressed in an orthonormal basis
  int kernel_dim = 0;
};

// Splits off the shared null space of Re and Im after rotating by theta.
inline Deflation deflate_kernel(const ComplexMatrix& a, double theta, double tol) {
  const double scale = spectral_norm(a);
  const ComplexMatrix rotated = std::exp(Complex(0.0, -theta)) * a;
  const HermitianEigen e = eig_hermitian(real_part(rotated), 1e-6);
  const Eigen::Index n = a.rows();
  Eigen::Index kernel = 0;
  while (kernel < n && e.eigenvalues(kernel) <= tol * scale) ++kernel;
  Deflation out;
  out.kernel_dim = static_cast<int>(kernel);
  if (kernel == n) return out;
  if (kernel > 0) {
    const ComplexMatrix null_basis = e.eigenvectors.leftCols(kernel);
    if (spectral_norm(a * null_basis) > 1e-7 * scale ||
        spectral_norm(a.adjoint() * null_basis) > 1e-7 * scale) {
      return out;
    }
  }
  const ComplexMatrix range = e.eigenvectors.rightCols(n - kernel);
  out.reduced = range.adjoint() * a * range;
  if (lambda_min(real_part(std::exp(Complex(0.0, -theta)) * out.reduced)) <= tol * scale) {
    return out;
  }
  out.ok = true;
  return out;
}

inline void require_nonzero(const ComplexMatrix& a) {
  require_square(a, "matrix");
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::ZeroMatrix, "sectoriality is undefined for the zero matrix");
  }
}

}  // namespace detail

inline Sectoriality classify_sectoriality(const ComplexMatrix& a, double tol = kSectorialityTol) {
  detail::require_nonzero(a);
  const detail::SupportScan scan = detail::scan_support(a, tol);
  if (scan.value > tol * scan.scale) return Sectoriality::Sectorial;
  if (scan.value < -tol * scan.scale) return Sectoriality::NonSemiSectorial;
  return detail::deflate_kernel(a, scan.theta, tol).ok ? Sectoriality::QuasiSectorial
                                                       : Sectoriality::SemiSectorial;
}

namespace detail {

// Phases from a sectorial decomposition (after kernel deflation for
// quasi-sectorial input). Semi-sectorial matrices with field angle pi are refused.
inline PhaseSpectrum phases_from_scan(const ComplexMatrix& a, const SupportScan& scan, double tol) {
  PhaseSpectrum spec;
  ComplexMatrix core = a;
  if (scan.value > tol * scan.scale) {
    spec.sectoriality = Sectoriality::Sectorial;
  } else if (scan.value < -tol * scan.scale) {
    throw Error(ErrorCode::NotQuasiSectorial, "0 lies in the interior of the numerical range");
  } else {
    detail::Deflation d = detail::deflate_kernel(a, scan.theta, tol);
    if (!d.ok) throw Error(ErrorCode::NotQuasiSectorial, "field angle reaches pi");
    spec.sectoriality = Sectoriality::QuasiSectorial;
    spec.rank_deficiency = d.kernel_dim;
    core = std::move(d.reduced);
  }

  const ComplexMatrix rotated = std::exp(Complex(0.0, -scan.theta)) * core;
  RealVector tangents;
  try {
    tangents = gevp_hermitian_definite(imag_part(rotated), real_part(rotated), tol);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotDefinite) throw;
    throw Error(ErrorCode::DegenerateRotation, "no rotation gives a positive definite real part");
  }
  spec.phases.resize(static_cast<std::size_t>(tangents.size()));
  for (Eigen::Index i = 0; i < tangents.size(); ++i) {
    spec.phases[static_cast<std::size_t>(i)] = scan.theta + std::atan(tangents(i));
  }
  std::sort(spec.phases.begin(), spec.phases.end(), std::greater<>());

  const double raw_center = 0.5 * (spec.phases.front() + spec.phases.back());
  const double shift = wrap_angle(raw_center) - raw_center;
  for (double& p : spec.phases) p += shift;
  spec.center = raw_center + shift;
  spec.field_angle = spec.phases.front() - spec.phases.back();
  spec.phase_index =
      std::min(kPi, std::max(std::abs(spec.phases.front()), std::abs(spec.phases.back())));
  return spec;
}

}  // namespace detail

inline PhaseSpectrum matrix_phases(const ComplexMatrix& a, double tol = kSectorialityTol) {
  detail::require_nonzero(a);
  return detail::phases_from_scan(a, detail::scan_support(a, tol), tol);
}

/// sup |angle z| over W(A) \ {0}. Total: 0 for the zero matrix, pi when 0 is
/// interior to W(A).
inline double phase_index(const ComplexMatrix& a, double tol = kSectorialityTol) {
  require_square(a, "phase_index input");
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const detail::SupportScan scan = detail::scan_support(a, tol);
  if (scan.value > tol * scan.scale) return detail::phases_from_scan(a, scan, tol).phase_index;
  if (scan.value < -tol * scan.scale) return kPi;
  if (detail::deflate_kernel(a, scan.theta, tol).ok) {
    return detail::phases_from_scan(a, scan, tol).phase_index;
  }
  // Field angle pi: W(A) lies in a closed half-plane whose boundary line passes
  // through 0. When W(A) is a segment on that line both normals qualify.
  double best = std::min(kPi, 0.5 * kPi + std::abs(wrap_angle(scan.theta)));
  const double opposite = wrap_angle(scan.theta + kPi);
  if (support_min(a, opposite) >= -tol * scan.scale) {
    best = std::min(best, std::min(kPi, 0.5 * kPi + std::abs(opposite)));
  }
  return best;
}

/// Theta(A): 2 pi when 0 is interior to W(A), pi on the semi-sectorial boundary.
inline double field_angle(const ComplexMatrix& a, double tol = kSectorialityTol) {
  switch (classify_sectoriality(a, tol)) {
    case Sectoriality::NonSemiSectorial: return 2.0 * kPi;
    case Sectoriality::SemiSectorial: return kPi;
    default: return matrix_phases(a, tol).field_angle;
  }
}

/// kappa Re(A) -/+ Im(A) >= 0 up to tol ||A||; certifies phase_index(A) <= atan(kappa).
/// Re(A) >= 0 is checked as well: the pair implies it for kappa > 0 but not at kappa = 0.
inline bool phase_bound_lmi_check(const ComplexMatrix& a, double kappa, double tol = kDefaultTol) {
  if (kappa < 0.0) throw Error(ErrorCode::InvalidParameter, "kappa must be nonnegative");
  const auto [re, im] = hermitian_parts(a);
  const double slack = -tol * spectral_norm(a);
  return lambda_min(re) >= slack && lambda_min(kappa * re - im) >= slack &&
         lambda_min(kappa * re + im) >= slack;
}

/// Every eigenvalue of AB has phase within [min A + min B, max A + max B] modulo 2 pi.
inline bool eig_phase_bound_holds(const ComplexMatrix& a, const ComplexMatrix& b,
                                  double angle_tol = 1e-7) {
  const PhaseSpectrum pa = matrix_phases(a);
  const PhaseSpectrum pb = matrix_phases(b);
  const double lo = pa.min_phase() + pb.min_phase();
  const double hi = pa.max_phase() + pb.max_phase();
  const ComplexMatrix prod = a * b;
  const double floor = 1e-10 * std::max(spectral_norm(prod), 1e-300);
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(prod, false);
  for (Eigen::Index i = 0; i < prod.rows(); ++i) {
    const Complex lambda = solver.eigenvalues()(i);
    if (std::abs(lambda) <= floor) continue;
    const double angle = std::arg(lambda);
    // representative of angle closest to the interval center
    const double mid = 0.5 * (lo + hi);
    const double shifted = mid + wrap_angle(angle - mid);
    if (shifted < lo - angle_tol || shifted > hi + angle_tol) return false;
  }
  return true;
}

struct BoundarySample {
  double theta;
  Complex point;
};

/// Support points of W(A): for each direction theta the point x^*Ax with x the
/// top eigenvector of Re(e^{-j theta} A).
inline std::vector<BoundarySample> numerical_range_boundary(const ComplexMatrix& a, int count) {
  std::vector<BoundarySample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double theta = -kPi + 2.0 * kPi * k / count;
    const HermitianEigen e = eig_hermitian(real_part(std::exp(Complex(0.0, -theta)) * a), 1e-6);
    const ComplexVector x = e.eigenvectors.col(e.eigenvectors.cols() - 1);
    out.push_back({theta, x.dot(a * x)});
  }
  return out;
}

}  // namespace phasecert
