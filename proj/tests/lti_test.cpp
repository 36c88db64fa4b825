#include <gtest/gtest.h>

#include <cmath>

#include "phasecert/block_structure.hpp"
#include "phasecert/lti.hpp"
#include "support/random.hpp"

namespace phasecert {
namespace {

using testing::Rng;

// Closed-loop characteristic polynomial of the benchmark, from
// det(I + T Delta) cleared of denominators.
Complex benchmark_charpoly(double a, double b, Complex s) {
  return s * s * s + (2.5 + b) * s * s + (1.5 + 2.75 * b) * s + b * (1.875 + 0.125 * a * a);
}

// Routh-Hurwitz: unstable iff 2.75 b^2 + (6.5 - a^2/8) b + 3.75 < 0.
std::optional<std::pair<double, double>> routh_interval(double a) {
  const double p = 0.125 * a * a - 6.5;
  const double disc = p * p - 4.0 * 2.75 * 3.75;
  if (p <= 0 || disc <= 0) return std::nullopt;
  return std::make_pair((p - std::sqrt(disc)) / 5.5, (p + std::sqrt(disc)) / 5.5);
}

StateSpace random_stable(Rng& rng, int nx, int nu, int ny) {
  RealMatrix a = testing::random_complex(rng, nx).real();
  // shift so every eigenvalue sits left of -0.1
  const double shift = poles(make_state_space(a, RealMatrix::Zero(nx, 0), RealMatrix::Zero(0, nx),
                                              RealMatrix::Zero(0, 0), false))
                           .real()
                           .maxCoeff();
  a -= (shift + 0.1 + testing::uniform(rng, 0.0, 1.0)) * RealMatrix::Identity(nx, nx);
  return make_state_space(a, testing::random_complex(rng, nx, nu).real(), testing::random_complex(rng, ny, nx).real(),
                          testing::random_complex(rng, ny, nu).real(), true);
}

TEST(FreqResponse, StaticSystem) {
  RealMatrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const StateSpace s = static_gain(m);
  for (double w : {0.0, 1.0, 1e6, std::numeric_limits<double>::infinity()}) {
    EXPECT_LT((freq_response(s, w) - m.cast<Complex>()).norm(), 1e-15);
  }
}

TEST(FreqResponse, FirstOrderLag) {
  const StateSpace s = make_state_space(RealMatrix::Constant(1, 1, -1.0), RealMatrix::Ones(1, 1),
                                        RealMatrix::Ones(1, 1), RealMatrix::Zero(1, 1), true);
  EXPECT_NEAR(std::abs(freq_response(s, 0.0)(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(freq_response(s, 1.0)(0, 0) - 1.0 / Complex(1.0, 1.0)), 0.0, 1e-15);
  EXPECT_LT(std::abs(freq_response(s, 1e8)(0, 0)), 1e-7);
  EXPECT_EQ(freq_response(s, std::numeric_limits<double>::infinity())(0, 0), Complex(0.0));
}

TEST(FreqResponse, PoleOnAxisIsRejected) {
  RealMatrix a(2, 2);
  a << 0, 1, -4, 0;  // poles at +-2j
  const StateSpace s = make_state_space(a, RealMatrix::Ones(2, 1), RealMatrix::Ones(1, 2), RealMatrix::Zero(1, 1), false);
  try {
    freq_response(s, 2.0);
    FAIL() << "expected FrequencyAtPole";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FrequencyAtPole);
  }
  EXPECT_NO_THROW(freq_response(s, 1.0));
}

TEST(StateSpaceCheck, RejectsInconsistentSizes) {
  try {
    make_state_space(RealMatrix::Zero(2, 2), RealMatrix::Zero(3, 1), RealMatrix::Zero(1, 2), RealMatrix::Zero(1, 1),
                     false);
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  EXPECT_THROW(make_state_space(RealMatrix::Identity(1, 1), RealMatrix::Ones(1, 1), RealMatrix::Ones(1, 1),
                                RealMatrix::Zero(1, 1), true),
               Error);
}

TEST(RotatingBody, DcGainRolloffAndPoles) {
  for (double a : {0.0, 3.0, 10.0, 11.23}) {
    const StateSpace t = rotating_body_T(a);
    ComplexMatrix dc(2, 2);
    dc << 1.0, a, -a, 1.0;
    EXPECT_LT((freq_response(t, 0.0) - dc).norm(), 1e-13);
    EXPECT_LT(spectral_norm(freq_response(t, 1e9)), 1e-7 * (1 + a));
    const ComplexVector p = poles(t);
    ASSERT_EQ(p.size(), 2);
    for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(p(i) + 1.0), 0.0, 1e-12);
  }
}

TEST(RotatingBody, MatchesClosedForm) {
  const double a = 7.0;
  for (double w : {0.0, 0.3, 2.0, 40.0}) {
    ComplexMatrix expect(2, 2);
    expect << 1.0, a, -a, 1.0;
    expect /= Complex(1.0, w);
    EXPECT_LT((freq_response(rotating_body_T(a), w) - expect).norm(), 1e-13);
  }
}

TEST(DeltaFamily, NormIsHalfAtEveryFrequency) {
  const BlockDims chi{{}, {1, 1}};
  for (double b : {0.05, 1.0, 22.0, 100.0}) {
    const StateSpace d = delta_family(b);
    for (int k = 0; k < 40; ++k) {
      const double w = k == 0 ? 0.0 : std::pow(10.0, -3.0 + 6.0 * k / 39.0);
      const ComplexMatrix dw = freq_response(d, w);
      EXPECT_NEAR(spectral_norm(dw), 0.5, 1e-14);
      EXPECT_TRUE(is_member_B(chi, dw));
      EXPECT_NEAR(std::abs(dw(1, 1) - 0.25 / (Complex(0.0, w / b) + 1.0)), 0.0, 1e-14);
    }
    ComplexMatrix dc = ComplexMatrix::Zero(2, 2);
    dc(0, 0) = 0.5;
    dc(1, 1) = 0.25;
    EXPECT_LT((freq_response(d, 0.0) - dc).norm(), 1e-15);
  }
}

TEST(DeltaFamily, RejectsNonPositivePole) {
  for (double b : {0.0, -1.0}) {
    try {
      delta_family(b);
      FAIL() << "expected InvalidParameter";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidParameter);
    }
  }
}

TEST(ClosedLoop, ZeroPerturbationKeepsOpenLoopPoles) {
  const StateSpace g = rotating_body_T(10.0);
  const ComplexVector p = closed_loop_poles(g, static_gain(RealMatrix::Zero(2, 2)));
  ASSERT_EQ(p.size(), 2);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(p(i) + 1.0), 0.0, 1e-12);
}

TEST(ClosedLoop, FirstOrderLoop) {
  const StateSpace g = make_state_space(RealMatrix::Constant(1, 1, -1.0), RealMatrix::Ones(1, 1),
                                        RealMatrix::Ones(1, 1), RealMatrix::Zero(1, 1), true);
  for (double k : {-0.5, 0.0, 2.0, 7.5}) {
    const ComplexVector p = closed_loop_poles(g, static_gain(RealMatrix::Constant(1, 1, k)));
    ASSERT_EQ(p.size(), 1);
    EXPECT_NEAR(std::abs(p(0) + (1.0 + k)), 0.0, 1e-12);
  }
}

TEST(ClosedLoop, IllPosedFeedthrough) {
  const StateSpace g = static_gain(RealMatrix::Ones(1, 1));
  try {
    closed_loop_poles(g, static_gain(-RealMatrix::Ones(1, 1)));
    FAIL() << "expected IllPosed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IllPosed);
  }
}

TEST(ClosedLoop, BenchmarkPolesAreCharacteristicRoots) {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = testing::uniform(rng, 0.0, 20.0);
    const double b = std::exp(testing::uniform(rng, -4.0, 5.0));
    const ComplexVector p = closed_loop_poles(rotating_body_T(a), delta_family(b));
    ASSERT_EQ(p.size(), 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double scale = std::pow(1.0 + std::abs(p(i)), 3) + b * (2.0 + a * a);
      EXPECT_LT(std::abs(benchmark_charpoly(a, b, p(i))) / scale, 1e-10);
    }
  }
}

TEST(ClosedLoop, StabilityAgreesWithRouthAcrossParameters) {
  Rng rng(72);
  for (int trial = 0; trial < 300; ++trial) {
    const double a = testing::uniform(rng, 0.0, 20.0);
    const double b = std::exp(testing::uniform(rng, -4.0, 5.0));
    const double margin = 2.75 * b * b + (6.5 - 0.125 * a * a) * b + 3.75;
    if (std::abs(margin) < 1e-6 * (1.0 + b * b)) continue;
    EXPECT_EQ(benchmark_stable(a, b), margin > 0) << "a=" << a << " b=" << b;
  }
}

TEST(Hurwitz, BoundaryConvention) {
  EXPECT_TRUE(is_hurwitz(ComplexVector::Constant(1, -1.0)));
  EXPECT_FALSE(is_hurwitz(ComplexVector::Constant(1, 0.1)));
  ComplexVector p(2);
  p << -1.0, 1e-12;
  EXPECT_FALSE(is_hurwitz(p));
  p << -1.0, -1e-12;
  EXPECT_FALSE(is_hurwitz(p));
  EXPECT_TRUE(is_hurwitz(p, 0.0));
}

TEST(Series, ResponseIsProduct) {
  Rng rng(73);
  for (int trial = 0; trial < 40; ++trial) {
    const int nu = testing::uniform_int(rng, 1, 3), nm = testing::uniform_int(rng, 1, 3),
              ny = testing::uniform_int(rng, 1, 3);
    const StateSpace g1 = random_stable(rng, testing::uniform_int(rng, 1, 4), nu, nm);
    const StateSpace g2 = random_stable(rng, testing::uniform_int(rng, 1, 4), nm, ny);
    const StateSpace s = series(g1, g2);
    for (double w : {0.0, 0.7, 3.0, 50.0}) {
      const ComplexMatrix expect = freq_response(g2, w) * freq_response(g1, w);
      EXPECT_LT((freq_response(s, w) - expect).norm(), 1e-9 * (1.0 + expect.norm()));
    }
  }
}

TEST(Benchmark, DefaultRotationRateIsNeverUnstable) {
  EXPECT_FALSE(instability_interval(10.0).has_value());
  EXPECT_FALSE(routh_interval(10.0).has_value());
}

TEST(Benchmark, InstabilityIntervalMatchesRouth) {
  for (double a : {10.5, 11.23, 13.0, 20.0}) {
    const auto iv = instability_interval(a);
    const auto expect = routh_interval(a);
    ASSERT_TRUE(iv.has_value());
    ASSERT_TRUE(expect.has_value());
    EXPECT_NEAR(iv->lower, expect->first, 1e-6 * expect->first);
    EXPECT_NEAR(iv->upper, expect->second, 1e-6 * expect->second);
  }
}

TEST(Benchmark, CalibrationReproducesIntervalWithinFifteenPercent) {
  const Calibration cal = calibrate_a();
  EXPECT_TRUE(cal.calibrated);
  const double a_expect = std::sqrt(8.0 * (2.75 * 2.9 + 6.5 + 3.75 / 2.9));
  EXPECT_NEAR(cal.a, a_expect, 1e-6);
  EXPECT_NEAR(cal.interval.upper, 2.9, 1e-6);
  EXPECT_NEAR(cal.interval.lower, 3.75 / (2.75 * 2.9), 1e-6);
  EXPECT_TRUE(within_relative(cal.interval.lower, 0.45, 0.15));
}

TEST(Benchmark, AlreadyMatchingRateIsKept) {
  const Calibration cal = calibrate_a(11.3);
  EXPECT_FALSE(cal.calibrated);
  EXPECT_EQ(cal.a, 11.3);
}

}  // namespace
}  // namespace phasecert
