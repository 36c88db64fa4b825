#include <gtest/gtest.h>

#include <cmath>

#include "phasecert/block_structure.hpp"
#include "phasecert/lmi.hpp"
#include "support/random.hpp"

namespace phasecert {
namespace {

using testing::Rng;

LinearMatrixPencil scalar_pencil(double c0, double c1, int d = 1) {
  LinearMatrixPencil f;
  f.constant = c0 * ComplexMatrix::Identity(d, d);
  f.coefficients = {c1 * ComplexMatrix::Identity(d, d)};
  return f;
}

Normalization unit_weights(int k, double value) {
  return {RealVector::Ones(k), value};
}

// D in span(basis) with D >= t, kappa Re(AD) -/+ Im(AD) >= t and tr(D) = n.
std::vector<LinearMatrixPencil> phase_cone_system(const ComplexMatrix& a, const StructuredBasis& basis,
                                                  double kappa) {
  const Eigen::Index n = a.rows();
  std::vector<LinearMatrixPencil> out(3);
  for (LinearMatrixPencil& f : out) f.constant = ComplexMatrix::Zero(n, n);
  for (const ComplexMatrix& e : basis.basis) {
    const ComplexMatrix ae = a * e;
    out[0].coefficients.push_back(e);
    out[1].coefficients.push_back(kappa * real_part(ae) - imag_part(ae));
    out[2].coefficients.push_back(kappa * real_part(ae) + imag_part(ae));
  }
  return out;
}

Normalization trace_normalization(const StructuredBasis& basis, double value) {
  Normalization norm;
  norm.weights.resize(static_cast<Eigen::Index>(basis.basis.size()));
  for (std::size_t i = 0; i < basis.basis.size(); ++i) {
    norm.weights(static_cast<Eigen::Index>(i)) = basis.basis[i].trace().real();
  }
  norm.value = value;
  return norm;
}

TEST(Feasibility, ScalarPencilIsFeasibleWithMarginOne) {
  // x I - I with x pinned to 2 by the normalization.
  LinearMatrixPencil f = scalar_pencil(-1.0, 1.0, 2);
  const FeasibilityResult r = feasibility({f}, unit_weights(1, 2.0));
  EXPECT_TRUE(r.feasible);
  EXPECT_NEAR(r.witness(0), 2.0, 1e-12);
  EXPECT_NEAR(r.margin, 1.0, 1e-7);
}

TEST(Feasibility, OpposingSignsAreInfeasible) {
  // diag(x1, -x1) plus a free variable x2 with trace-type normalization x1 + x2 = 1.
  LinearMatrixPencil f;
  f.constant = ComplexMatrix::Zero(2, 2);
  ComplexMatrix e1 = ComplexMatrix::Zero(2, 2);
  e1(0, 0) = 1.0;
  e1(1, 1) = -1.0;
  f.coefficients = {e1, ComplexMatrix::Zero(2, 2)};
  const FeasibilityResult r = feasibility({f}, unit_weights(2, 1.0));
  EXPECT_FALSE(r.feasible);
  EXPECT_LE(r.margin, 1e-8);
  EXPECT_LE(r.optimum_upper, 1e-6);
}

TEST(Feasibility, IdentityScalingCertifiesIdentity) {
  const BlockDims chi{{}, {1, 1}};
  const StructuredBasis basis = hermitian_basis(chi, StructureTarget::D_chi);
  const FeasibilityResult r =
      feasibility(phase_cone_system(ComplexMatrix::Identity(2, 2), basis, 0.0), trace_normalization(basis, 2.0));
  // kappa Re(AD) - Im(AD) = 0 at kappa = 0, so the margin is zero; one more
  // unit of kappa makes it strictly feasible with D = I.
  EXPECT_FALSE(r.feasible);
  EXPECT_NEAR(r.margin, 0.0, 1e-7);
  EXPECT_NEAR(r.witness(0), 1.0, 1e-4);
  EXPECT_NEAR(r.witness(1), 1.0, 1e-4);
  const FeasibilityResult r1 =
      feasibility(phase_cone_system(ComplexMatrix::Identity(2, 2), basis, 1.0), trace_normalization(basis, 2.0));
  EXPECT_TRUE(r1.feasible);
  EXPECT_NEAR(r1.witness(0), 1.0, 1e-4);
  EXPECT_NEAR(r1.witness(1), 1.0, 1e-4);
}

TEST(Feasibility, ComplexConstraintsAreHandled) {
  // [[1, x j], [-x j, 1]] >= t I is maximized at x = 0 with t = 1; the
  // normalization ties a second variable that enters as a diagonal shift.
  LinearMatrixPencil f;
  f.constant = ComplexMatrix::Identity(2, 2);
  ComplexMatrix e = ComplexMatrix::Zero(2, 2);
  e(0, 1) = kJ;
  e(1, 0) = -kJ;
  f.coefficients = {e, -ComplexMatrix::Identity(2, 2)};
  Normalization norm{RealVector::Unit(2, 1), 0.25};
  const FeasibilityResult r = feasibility({f}, norm);
  EXPECT_TRUE(r.feasible);
  EXPECT_NEAR(r.margin, 0.75, 1e-6);
  EXPECT_NEAR(r.witness(0), 0.0, 1e-4);
}

TEST(Feasibility, WitnessRecheckIsSound) {
  Rng rng(51);
  int feasible_count = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int d = testing::uniform_int(rng, 2, 4);
    const int k = testing::uniform_int(rng, 2, 5);
    std::vector<LinearMatrixPencil> pencils(2);
    for (LinearMatrixPencil& f : pencils) {
      f.constant = testing::random_hermitian(rng, d) * 0.3;
      for (int i = 0; i < k; ++i) f.coefficients.push_back(testing::random_hermitian(rng, d));
    }
    // First coefficient is identity in both pencils so feasibility varies across trials.
    for (LinearMatrixPencil& f : pencils) f.coefficients[0] = ComplexMatrix::Identity(d, d);
    Normalization norm{RealVector::Unit(k, 0), testing::uniform(rng, -1.0, 3.0)};
    const FeasibilityResult r = feasibility(pencils, norm);
    EXPECT_NEAR(norm.weights.dot(r.witness), norm.value, 1e-9);
    if (r.feasible) {
      ++feasible_count;
      for (const LinearMatrixPencil& f : pencils) {
        EXPECT_GE(eig_hermitian(f.evaluate(r.witness)).eigenvalues(0), 1e-8 - 1e-7);
      }
    }
    // The reported upper bound never undercuts the attained margin.
    EXPECT_GE(r.optimum_upper, r.margin - 1e-7);
  }
  EXPECT_GT(feasible_count, 5);
}

TEST(Feasibility, ScaleInvarianceOfPhaseConeSystems) {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix a = testing::random_sectorial(rng, 3, testing::uniform(rng, -0.6, 0.6), 1.0);
    const BlockDims chi{{1}, {1, 1}};
    const StructuredBasis basis = hermitian_basis(chi, StructureTarget::D_chi);
    const double kappa = testing::uniform(rng, 0.5, 4.0);
    const double c = testing::uniform(rng, 0.1, 10.0);
    const FeasibilityResult r1 = feasibility(phase_cone_system(a, basis, kappa), trace_normalization(basis, 3.0));
    const FeasibilityResult r2 =
        feasibility(phase_cone_system(c * a, basis, kappa), trace_normalization(basis, 3.0));
    if (std::abs(r1.margin) > 1e-5 && std::abs(r2.margin / c) > 1e-5) EXPECT_EQ(r1.feasible, r2.feasible);
    if (r1.feasible) {
      // The same D certifies the scaled system.
      for (const LinearMatrixPencil& f : phase_cone_system(c * a, basis, kappa)) {
        EXPECT_GE(lambda_min(f.evaluate(r1.witness)), -1e-9);
      }
    }
  }
}

TEST(Feasibility, RejectsZeroNormalization) {
  try {
    feasibility({scalar_pencil(0.0, 1.0)}, {RealVector::Zero(1), 1.0});
    FAIL() << "expected InvalidParameter";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParameter);
  }
}

FeasibilityResult step(bool ok) {
  FeasibilityResult r;
  r.feasible = ok;
  r.margin = ok ? 1.0 : -1.0;
  return r;
}

TEST(GevpBisection, StepOracle) {
  const double tol = 1e-6;
  const BisectionResult b = gevp_bisection([](double k) { return step(k >= 1.0); }, 10.0, tol);
  ASSERT_TRUE(b.value.has_value());
  EXPECT_NEAR(*b.value, 1.0, tol);
  EXPECT_GE(*b.value, 1.0);
  EXPECT_LE(b.solver_calls, static_cast<int>(std::ceil(std::log2(10.0 / tol))) + 2);
}

TEST(GevpBisection, AlwaysInfeasible) {
  const BisectionResult b = gevp_bisection([](double) { return step(false); }, 10.0, 1e-6);
  EXPECT_FALSE(b.value.has_value());
  EXPECT_EQ(b.solver_calls, 1);
}

TEST(GevpBisection, FeasibleAtZero) {
  const BisectionResult b = gevp_bisection([](double) { return step(true); }, 10.0, 1e-6);
  ASSERT_TRUE(b.value.has_value());
  EXPECT_EQ(*b.value, 0.0);
}

TEST(GevpBisection, CallBudgetOverThresholds) {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const double upper = testing::uniform(rng, 1.0, 1000.0);
    const double tol = std::pow(10.0, -testing::uniform(rng, 2.0, 9.0));
    const double threshold = testing::uniform(rng, 0.0, upper);
    const BisectionResult b = gevp_bisection([&](double k) { return step(k >= threshold); }, upper, tol);
    ASSERT_TRUE(b.value.has_value());
    EXPECT_LE(std::abs(*b.value - threshold), tol);
    EXPECT_LE(b.solver_calls, static_cast<int>(std::ceil(std::log2(upper / tol))) + 2);
  }
}

TEST(GevpBisection, PhaseConeForRotatedIdentity) {
  const ComplexMatrix a = std::polar(1.0, kPi / 4) * ComplexMatrix::Identity(2, 2);
  const BlockDims chi{{2}, {}};
  const StructuredBasis basis = hermitian_basis(chi, StructureTarget::D_chi);
  FeasibilityOptions opt;
  opt.stop_when_decided = true;
  const BisectionResult b = gevp_bisection(
      [&](double kappa) {
        return feasibility(phase_cone_system(a, basis, kappa), trace_normalization(basis, 2.0), opt);
      },
      std::tan(89.9 * kPi / 180.0), 1e-6);
  ASSERT_TRUE(b.value.has_value());
  EXPECT_NEAR(*b.value, 1.0, 1e-4);
}

}  // namespace
}  // namespace phasecert
