#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fracwave/groundstate.hpp"
#include "reference_constants.hpp"
#include "support.hpp"

using namespace fracwave;
using fwtest::max_abs_diff;

TEST(Petviashvili, BenjaminOnoSolitonIsReproduced) {
  const auto& gs = fwtest::ground_state(2048.0, 1 << 15, 2, 1e-10);
  Field exact = Field::from_function(gs.grid(), [](double x) { return 2.0 / (1.0 + x * x); });
  EXPECT_LT(max_abs_diff(gs.Q, exact, 0.5), 1e-5);
}

TEST(Petviashvili, GroundStateIsPositiveEvenAndDecreasing) {
  const auto& gs = fwtest::ground_state(512.0, 1 << 14);
  const Grid& g = gs.grid();
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_GT(gs.Q[i], 0.0);
  for (std::size_t i = 1; i < n; ++i) EXPECT_NEAR(gs.Q[i], gs.Q[n - i], 1e-14);
  for (std::size_t i = n / 2; i + 1 < n; ++i) EXPECT_LT(gs.Q[i + 1], gs.Q[i] + 1e-10);
}

TEST(Petviashvili, ExitsWithStabilizerNearOneAndResidualBelowTolerance) {
  const double tol = 1e-11;
  GroundState gs = petviashvili(3, 1.0, Grid(512.0, 1 << 14), tol, 5000);
  EXPECT_LT(std::abs(gs.stabilizer - 1.0), tol);
  EXPECT_LT(gs.residual_norm / norm_l2(gs.Q), tol);
}

TEST(Petviashvili, RejectsBadParameters) {
  Grid g(64.0, 256);
  EXPECT_THROW(petviashvili(4, 1.0, g, 1e-8, 10), Error);
  EXPECT_THROW(petviashvili(3, 0.4, g, 1e-8, 10), Error);
  EXPECT_THROW(petviashvili(3, 1.0, g, 0.0, 10), Error);
}

TEST(Petviashvili, ReportsMaxIterations) {
  try {
    petviashvili(3, 1.0, Grid(256.0, 1 << 12), 1e-14, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "max_iter");
  }
}

TEST(Petviashvili, HandlesOtherDispersionOrders) {
  GroundState gs = petviashvili(3, 1.5, Grid(256.0, 1 << 13), 1e-10, 5000);
  auto rep = verify_identities(gs);
  for (const auto& c : rep.checks) EXPECT_FALSE(c.flagged) << c.name << " " << c.defect;
}

TEST(Energy, VanishesOnZero) {
  Field z(Grid(64.0, 256));
  EXPECT_EQ(mass(z), 0.0);
  EXPECT_EQ(energy(z), 0.0);
}

TEST(Energy, GroundStateHasZeroEnergy) {
  const auto& gs = fwtest::ground_state(4096.0, 1 << 17);
  EXPECT_LT(std::abs(energy(gs.Q)), 1e-6 * gs.int_q2);
}

// The energy defect of the periodized Q decays like L^{-2}; at this tolerance
// the box has to reach L = 8192.
TEST(Energy, SubcriticalMultipleFollowsPolynomialExpansion) {
  const auto& gs = fwtest::ground_state(8192.0, 1 << 18);
  const double a = 0.1;
  const double expected = a * (1 - 2.5 * a + 2 * a * a - 0.5 * a * a * a) * gs.int_q2;
  EXPECT_LT(std::abs(energy((1 - a) * gs.Q) - expected), 1e-6 * expected);
}

TEST(Weinstein, GroundStateValueIsHalfMass) {
  const auto& gs = fwtest::ground_state(2048.0, 1 << 16);
  const double q2 = gs.int_q2, q4 = integral(pow(gs.Q, 4));
  ASSERT_LT(std::abs(q2 - 0.5 * q4) / q2, 1e-5);
  EXPECT_LT(std::abs(weinstein_W(gs.Q) - 0.5 * q2) / q2, 1e-5);
}

TEST(Weinstein, IsScaleInvariant) {
  Grid g(800.0, 1 << 14);
  // second derivative of a bump: its transform vanishes to second order at
  // xi = 0, so the |xi| kink does not spoil the discrete D^{1/2} quadrature
  auto v = [](double x) {
    return std::exp(-x * x) * (-2 * (1 + 0.3 * x) - 1.2 * x + 4 * x * x * (1 + 0.3 * x));
  };
  Field f = Field::from_function(g, v);
  for (double lam : {0.5, 2.0, 3.0}) {
    Field fl = Field::from_function(g, [&](double x) { return v(x / lam) / std::sqrt(lam); });
    EXPECT_LT(std::abs(weinstein_W(fl) - weinstein_W(f)) / weinstein_W(f), 1e-10) << lam;
  }
}

TEST(Weinstein, RejectsZero) { EXPECT_THROW(weinstein_W(Field(Grid(64.0, 256))), Error); }

TEST(Weinstein, GroundStateIsTheMinimizer) {
  const auto& gs = fwtest::ground_state(512.0, 1 << 14);
  const double wq = weinstein_W(gs.Q);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    Field v = fwtest::random_bumps(gs.grid(), rng, 5, 20.0);
    if (integral(pow(v, 4)) < 1e-8) continue;
    EXPECT_GE(weinstein_W(v), wq * (1 - 1e-3));
  }
}

TEST(Weinstein, IsFlatToSecondOrderAtTheMinimizer) {
  const auto& gs = fwtest::ground_state(512.0, 1 << 14);
  const double wq = weinstein_W(gs.Q);
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    Field w = fwtest::random_bumps(gs.grid(), rng, 4, 10.0);
    w *= 1.0 / norm_l2(w);
    EXPECT_GE(weinstein_W(gs.Q + 1e-2 * w), wq - 1e-6);
  }
}

TEST(Identities, HoldForMbo) {
  const auto& gs = fwtest::ground_state(2048.0, 1 << 16);
  auto rep = verify_identities(gs);
  ASSERT_EQ(rep.checks.size(), 3u);
  for (const auto& c : rep.checks) EXPECT_LT(c.defect, 1e-4) << c.name;
  EXPECT_GE(rep.decay_exponent, 1.8);
  EXPECT_LE(rep.decay_exponent, 2.2);
  EXPECT_TRUE(rep.all_ok());
}

// int Q_BO^2 = 2 pi, int Q_BO^3 = 3 pi, int |D^{1/2}Q_BO|^2 = pi.
TEST(Identities, ClosedFormIntegralsOfBenjaminOnoSoliton) {
  const auto& gs = fwtest::ground_state(2048.0, 1 << 15, 2, 1e-10);
  const double pi = std::numbers::pi;
  // periodization adds O(1/L) to the integrals of the slowly decaying soliton
  EXPECT_NEAR(integral(pow(gs.Q, 3)), 3 * pi, 1e-4 * 3 * pi);
  EXPECT_NEAR(seminorm_half_sq(gs.Q), pi, 1e-3 * pi);
  auto rep = verify_identities(gs);
  for (const auto& c : rep.checks) EXPECT_LT(c.defect, 1e-4) << c.name;
  EXPECT_NEAR(rep.decay_exponent, 2.0, 0.2);
}

TEST(Identities, LooseSolveIsFlagged) {
  GroundState gs = petviashvili(3, 1.0, Grid(2048.0, 1 << 15), 1e-2, 5000);
  auto rep = verify_identities(gs);
  EXPECT_GT(rep.checks[0].defect, 1e-4);
  EXPECT_TRUE(rep.checks[0].flagged);
}

TEST(Refinement, DoublingResolutionLeavesMassUnchanged) {
  const auto& a = fwtest::ground_state(512.0, 1 << 14);
  GroundState b = petviashvili(3, 1.0, Grid(512.0, 1 << 15), 1e-12, 5000);
  EXPECT_LT(std::abs(a.int_q2 - b.int_q2) / a.int_q2, 1e-8);
}

// The periodized tail changes int Q^2 by an amount that vanishes as L grows;
// measured convergence is at least first order in 1/L.
TEST(Refinement, DoublingLengthConvergesAlgebraically) {
  const auto& a = fwtest::ground_state(512.0, 1 << 14);
  const auto& b = fwtest::ground_state(1024.0, 1 << 15);
  const auto& c = fwtest::ground_state(2048.0, 1 << 16);
  const double d1 = std::abs(b.int_q2 - a.int_q2), d2 = std::abs(c.int_q2 - b.int_q2);
  EXPECT_GT(d1, 0.0);
  EXPECT_GE(std::log2(d1 / d2), 1.0);
}

TEST(Pinned, MassOnReferenceGrid) {
  const auto& gs = fwtest::ground_state(4096.0, 1 << 16);
  EXPECT_NEAR(gs.int_q2, fwref::int_q2_L4096_n65536, 1e-10 * gs.int_q2);
}

TEST(Pinned, RealLineMassFromRichardsonExtrapolation) {
  const auto& a = fwtest::ground_state(2048.0, 1 << 16);
  const auto& b = fwtest::ground_state(4096.0, 1 << 17);
  const double extrapolated = (4 * b.int_q2 - a.int_q2) / 3;  // O(1/L^2) error
  EXPECT_NEAR(extrapolated, fwref::int_q2_real_line, 1e-8);
}

// Inside the box the periodic Q carries the images of its c/y^2 tail;
// removing them recovers the real-line tail seen on a much larger box.
TEST(RealLine, EvaluationRemovesTailImages) {
  const auto& gs = fwtest::ground_state(512.0, 1 << 14);
  const auto& big = fwtest::ground_state(4096.0, 1 << 17);
  auto a = evaluate_real_line(gs, 50.0, 0.25, 601);
  auto b = evaluate_real_line(big, 50.0, 0.25, 601);
  auto c = interp_uniform(gs.Q, 50.0, 0.25, 601);
  double err = 0.0, raw = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    err = std::max(err, std::abs(a[j] - b[j]) / b[j]);
    raw = std::max(raw, std::abs(c[j] - b[j]) / b[j]);
  }
  EXPECT_LT(err, 1e-3);
  EXPECT_GT(raw, 0.1);
}

TEST(RealLine, OutsideTheBoxFollowsTheTailLaw) {
  const auto& gs = fwtest::ground_state(512.0, 1 << 14);
  auto v = evaluate_real_line(gs, 300.0, 100.0, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const double y = 300.0 + 100.0 * j;
    EXPECT_NEAR(v[j], gs.decay_coefficient / (y * y), 1e-14);
  }
}
