#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phasecert/error.hpp"
#include "phasecert/matrix_core.hpp"

namespace phasecert {

/// Continuous-time state-space realization x' = Ax + Bu, y = Cx + Du.
struct StateSpace {
  RealMatrix a, b, c, d;
  bool stable = false;

  Eigen::Index states() const { return a.rows(); }
  Eigen::Index inputs() const { return d.cols(); }
  Eigen::Index outputs() const { return d.rows(); }
};

inline ComplexVector poles(const StateSpace& sys) {
  if (sys.states() == 0) return ComplexVector(0);
  Eigen::EigenSolver<RealMatrix> solver(sys.a, false);
  return solver.eigenvalues();
}

inline bool is_hurwitz(const ComplexVector& p, double margin = 1e-9) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p(i).real() < -margin)) return false;
  }
  return true;
}

/// Checks dimensions and, when the stable flag is set, that A is Hurwitz.
inline StateSpace make_state_space(RealMatrix a, RealMatrix b, RealMatrix c, RealMatrix d, bool stable) {
  const Eigen::Index nx = a.rows();
  if (a.cols() != nx || b.rows() != nx || c.cols() != nx || c.rows() != d.rows() || b.cols() != d.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "state-space blocks have inconsistent sizes (A " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + ", B " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                    ", C " + std::to_string(c.rows()) + "x" + std::to_string(c.cols()) + ", D " +
                    std::to_string(d.rows()) + "x" + std::to_string(d.cols()) + ")");
  }
  StateSpace sys{std::move(a), std::move(b), std::move(c), std::move(d), stable};
  if (stable && !is_hurwitz(poles(sys))) {
    throw Error(ErrorCode::InvalidParameter, "system flagged stable but A is not Hurwitz");
  }
  return sys;
}

inline StateSpace static_gain(const RealMatrix& d) {
  return make_state_space(RealMatrix(0, 0), RealMatrix(0, d.cols()), RealMatrix(d.rows(), 0), d, true);
}

/// C (j omega I - A)^{-1} B + D; omega = +inf returns the feedthrough D.
inline ComplexMatrix freq_response(const StateSpace& sys, double omega) {
  const ComplexMatrix d = sys.d.cast<Complex>();
  if (std::isinf(omega) || sys.states() == 0) return d;
  const Eigen::Index nx = sys.states();
  const ComplexMatrix m = Complex(0.0, omega) * ComplexMatrix::Identity(nx, nx) - sys.a.cast<Complex>();
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (!(s(nx - 1) > 0.0) || s(0) / s(nx - 1) > 1e12) {
    throw Error(ErrorCode::FrequencyAtPole, "j*omega is an eigenvalue of A at omega = " + std::to_string(omega));
  }
  return sys.c.cast<Complex>() * m.partialPivLu().solve(sys.b.cast<Complex>()) + d;
}

/// Cascade: the response of the result is second(s) * first(s).
inline StateSpace series(const StateSpace& first, const StateSpace& second) {
  if (first.outputs() != second.inputs()) {
    throw Error(ErrorCode::DimensionMismatch, "series: output of the first system does not match the second");
  }
  const Eigen::Index n1 = first.states(), n2 = second.states();
  RealMatrix a = RealMatrix::Zero(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = first.a;
  a.bottomLeftCorner(n2, n1) = second.b * first.c;
  a.bottomRightCorner(n2, n2) = second.a;
  RealMatrix b(n1 + n2, first.inputs());
  b << first.b, second.b * first.d;
  RealMatrix c(second.outputs(), n1 + n2);
  c << second.d * first.c, second.c;
  return make_state_space(a, b, c, second.d * first.d, first.stable && second.stable);
}

/// Poles of the negative-feedback loop e1 = -Delta e2 + u1, e2 = G e1 + u2.
inline ComplexVector closed_loop_poles(const StateSpace& g, const StateSpace& delta) {
  if (g.outputs() != delta.inputs() || delta.outputs() != g.inputs()) {
    throw Error(ErrorCode::DimensionMismatch, "closed loop: G and Delta dimensions are not compatible");
  }
  const Eigen::Index ny = g.outputs();
  const RealMatrix w = RealMatrix::Identity(ny, ny) + g.d * delta.d;
  Eigen::JacobiSVD<RealMatrix> svd(w);
  const auto& s = svd.singularValues();
  if (!(s(ny - 1) > 0.0) || s(0) / s(ny - 1) > 1e10) {
    throw Error(ErrorCode::IllPosed, "I + D_G D_Delta is singular");
  }
  const RealMatrix winv = w.inverse();
  // e2 = e2x x + e2z z, e1 = e1x x + e1z z
  const RealMatrix e2x = winv * g.c;
  const RealMatrix e2z = -winv * g.d * delta.c;
  const RealMatrix e1x = -delta.d * e2x;
  const RealMatrix e1z = -delta.c - delta.d * e2z;

  const Eigen::Index nx = g.states(), nz = delta.states();
  RealMatrix a(nx + nz, nx + nz);
  a.topLeftCorner(nx, nx) = g.a + g.b * e1x;
  a.topRightCorner(nx, nz) = g.b * e1z;
  a.bottomLeftCorner(nz, nx) = delta.b * e2x;
  a.bottomRightCorner(nz, nz) = delta.a + delta.b * e2z;
  if (a.size() == 0) return ComplexVector(0);
  Eigen::EigenSolver<RealMatrix> solver(a, false);
  return solver.eigenvalues();
}

// Rotating-body benchmark

/// T(s) = [[1, a], [-a, 1]] / (s + 1).
inline StateSpace rotating_body_T(double a) {
  RealMatrix b(2, 2);
  b << 1.0, a, -a, 1.0;
  return make_state_space(-RealMatrix::Identity(2, 2), b, RealMatrix::Identity(2, 2), RealMatrix::Zero(2, 2), true);
}

/// Delta(s) = diag(0.5, 0.25 / (s/b + 1)).
inline StateSpace delta_family(double b) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw Error(ErrorCode::InvalidParameter, "perturbation pole b must be positive, got " + std::to_string(b));
  }
  RealMatrix a(1, 1), bm(1, 2), c(2, 1), d(2, 2);
  a << -b;
  bm << 0.0, b;
  c << 0.0, 0.25;
  d << 0.5, 0.0, 0.0, 0.0;
  return make_state_space(a, bm, c, d, true);
}

inline bool benchmark_stable(double a, double b) {
  return is_hurwitz(closed_loop_poles(rotating_body_T(a), delta_family(b)));
}

struct InstabilityInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Range of b over which the benchmark loop is unstable, located by a log
/// sweep of [b_min, b_max] and refined by bisection on both endpoints.
inline std::optional<InstabilityInterval> instability_interval(double a, double b_min = 1e-3, double b_max = 1e3,
                                                               int points = 400) {
  const double l0 = std::log(b_min), l1 = std::log(b_max);
  auto at = [&](int i) { return std::exp(l0 + (l1 - l0) * i / (points - 1)); };
  int first = -1, last = -1;
  for (int i = 0; i < points; ++i) {
    if (!benchmark_stable(a, at(i))) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return std::nullopt;

  // bisect between a stable and an unstable b
  auto refine = [&](double stable_b, double unstable_b) {
    for (int k = 0; k < 80 && std::abs(std::log(unstable_b / stable_b)) > 1e-12; ++k) {
      const double mid = std::sqrt(stable_b * unstable_b);
      (benchmark_stable(a, mid) ? stable_b : unstable_b) = mid;
    }
    return std::sqrt(stable_b * unstable_b);
  };
  InstabilityInterval out;
  out.lower = first == 0 ? at(0) : refine(at(first - 1), at(first));
  out.upper = last == points - 1 ? at(points - 1) : refine(at(last + 1), at(last));
  return out;
}

struct Calibration {
  double a = 10.0;
  bool calibrated = false;  // false when the requested a already matched
  InstabilityInterval interval;
};

inline bool within_relative(double value, double target, double tol) {
  return std::abs(value - target) <= tol * std::abs(target);
}

/// Chooses a so that the upper end of the instability interval matches
/// target_upper, unless a0 already reproduces both endpoints within tol.
inline Calibration calibrate_a(double a0 = 10.0, double target_lower = 0.45, double target_upper = 2.9,
                               double tol = 0.15) {
  auto matches = [&](const std::optional<InstabilityInterval>& iv) {
    return iv && within_relative(iv->lower, target_lower, tol) && within_relative(iv->upper, target_upper, tol);
  };
  const std::optional<InstabilityInterval> initial = instability_interval(a0);
  if (matches(initial)) return {a0, false, *initial};

  auto upper_of = [&](double a) {
    const std::optional<InstabilityInterval> iv = instability_interval(a);
    return iv ? iv->upper : 0.0;
  };
  double lo = a0, hi = a0;
  if (upper_of(a0) > target_upper) {
    lo = a0 / 2;
    while (upper_of(lo) > target_upper && lo > 1e-6) lo /= 2;
  } else {
    hi = 2 * a0;
    while (upper_of(hi) <= target_upper && hi < 1e6) hi *= 2;
  }
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    (upper_of(mid) > target_upper ? hi : lo) = mid;
  }
  const double a = 0.5 * (lo + hi);
  const std::optional<InstabilityInterval> iv = instability_interval(a);
  if (!matches(iv)) {
    throw Error(ErrorCode::CalibrationFailure, "no value of a reproduces the instability interval within " +
                                                   std::to_string(tol * 100) + "%");
  }
  return {a, true, *iv};
}

}  // namespace phasecert
