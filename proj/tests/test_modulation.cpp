#include <gtest/gtest.h>

#include <cmath>

#include "fracwave/evolve.hpp"
#include "fracwave/modulation.hpp"
#include "support.hpp"

using namespace fracwave;

namespace {
struct Fixture {
  const GroundState& gs = fwtest::ground_state(8192.0, 1 << 18);
  LinearizedOperator L{gs};
  Profile pr = build_P(L);
  Modulator M{L, pr};
};
Fixture& fx() {
  static Fixture f;
  return f;
}

// lambda^{-1/2} Q((x - x0) / lambda) on G
Field scaled_soliton(const Grid& G, double lambda, double x0) {
  Field u(G, evaluate_real_line(fx().gs, (G.left() - x0) / lambda, G.dx() / lambda, G.size()));
  u *= 1.0 / std::sqrt(lambda);
  return u;
}

// Small eps0 with eps0 + b P_b orthogonal to Q' and Lambda Q.
Field admissible_eps(double b) {
  const Modulator& M = fx().M;
  Field e = Field::from_function(M.grid(), [](double y) { return 1e-3 * std::exp(-(y - 1) * (y - 1)) * (y * y - 0.5); });
  Field eta = e + b * M.P_b(b);
  eta.axpy(-inner(eta, M.dQ()) / inner(M.dQ(), M.dQ()), M.dQ());
  eta.axpy(-inner(eta, M.LambdaQ()) / inner(M.LambdaQ(), M.LambdaQ()), M.LambdaQ());
  return eta - b * M.P_b(b);
}

const Grid big(4096.0, 1 << 18);
}  // namespace

TEST(Decompose, GroundStateIsTheIdentity) {
  const Modulator& M = fx().M;
  const ModulationFrame fr = M.decompose(M.Q(), 0.0, 1.0, 0.0);
  EXPECT_NEAR(fr.lambda, 1.0, 1e-12);
  EXPECT_NEAR(fr.x, 0.0, 1e-12);
  EXPECT_EQ(fr.b, 0.0);
  EXPECT_LT(norm_inf(fr.eps), 1e-12);
}

TEST(Decompose, RecoversScaleAndPosition) {
  const Field u = scaled_soliton(big, 0.7, 3.2);
  const ModulationFrame fr = fx().M.decompose(u, 0.0, 0.6, 3.0);
  EXPECT_NEAR(fr.lambda, 0.7, 1e-8);
  EXPECT_NEAR(fr.x, 3.2, 1e-8);
  EXPECT_LT(fr.eta_h_half, 1e-6);
}

TEST(Decompose, ConvergesFromHalfWidthGuess) {
  const Field u = scaled_soliton(big, 0.7, 3.2);
  const ModulationFrame fr = fx().M.decompose(u, 0.0, 1.05, 3.2 + 0.35);
  EXPECT_NEAR(fr.lambda, 0.7, 1e-8);
  EXPECT_NEAR(fr.x, 3.2, 1e-8);
}

TEST(Decompose, OrthogonalityHoldsAtExit) {
  const Field u = scaled_soliton(big, 0.7, 3.2) + Field::from_function(big, [](double x) {
                    return 0.01 * std::exp(-(x - 2.0) * (x - 2.0));
                  });
  const ModulationFrame fr = fx().M.decompose(u, 0.02, 0.7, 3.2);
  const double tol = 1e-10 * inner(fx().M.Q(), fx().M.Q());
  EXPECT_LT(fr.orth_Qprime, tol);
  EXPECT_LT(fr.orth_LambdaQ, tol);
  EXPECT_GT(fr.lambda, 0.0);
  EXPECT_DOUBLE_EQ(fr.b, -0.02 * fr.lambda / fx().M.p0());
}

TEST(Decompose, RecoversProfilePlusKnownRemainder) {
  const Modulator& M = fx().M;
  const double b = 0.05;
  const Field e0 = admissible_eps(b);
  const double E0 = -b * M.p0();  // lambda = 1
  const ModulationFrame fr = M.decompose(M.Q_b(b) + e0, E0, 1.1, 0.2);
  EXPECT_NEAR(fr.lambda, 1.0, 1e-8);
  EXPECT_NEAR(fr.x, 0.0, 1e-8);
  EXPECT_NEAR(fr.b, b, 1e-8);
  EXPECT_LT(norm_inf(fr.eps - e0), 1e-8);
}

TEST(Decompose, AssembleThenDecomposeRoundTrip) {
  const Modulator& M = fx().M;
  const double l0 = 0.7, x0 = 3.2, b0 = 0.05;
  const Field e0 = admissible_eps(b0);
  const Field u = M.assemble(big, l0, x0, b0, &e0);
  const ModulationFrame fr = M.decompose(u, -b0 * M.p0() / l0, 0.6, 3.0);
  EXPECT_NEAR(fr.lambda, l0, 1e-8);
  EXPECT_NEAR(fr.x, x0, 1e-8);
  EXPECT_NEAR(fr.b, b0, 1e-8);
  // The data box covers |y| < 2926; its edges carry the periodic wrap of the
  // profile tail, so eps is compared where the data are.
  EXPECT_LT(fwtest::max_abs_diff(fr.eps, e0, 0.6), 1e-8);
}

TEST(Decompose, GaugeCovariance) {
  const Modulator& M = fx().M;
  const Field u = scaled_soliton(big, 0.7, 3.2);
  const double mu = 2.0, E0 = 0.3;
  // u_mu(x) = mu^{-1/2} u(x / mu): same samples on a box mu times longer
  Field um(Grid(mu * big.length(), big.size()), u.data());
  um *= 1.0 / std::sqrt(mu);
  const ModulationFrame f1 = M.decompose(u, E0, 0.6, 3.0);
  const ModulationFrame f2 = M.decompose(um, E0 / mu, 1.2, 6.0);
  EXPECT_NEAR(f2.lambda / (mu * f1.lambda), 1.0, 1e-6);
  EXPECT_NEAR(f2.x, mu * f1.x, 1e-6);
  EXPECT_NEAR(f2.b, f1.b, 1e-6);
  EXPECT_LT(norm_inf(f2.eps - f1.eps), 1e-6);
}

TEST(Decompose, ZeroFieldIsOutsideTube) {
  try {
    fx().M.decompose(Field(big), 0.0, 1.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "outside tube");
  }
}

TEST(Decompose, FunctionalsNeedSmallScale) {
  const ModulationFrame a = fx().M.decompose(scaled_soliton(big, 0.7, 3.2), 0.0, 0.6, 3.0);
  EXPECT_FALSE(std::isnan(a.N_eps));
  const ModulationFrame c = fx().M.decompose(scaled_soliton(big, 1.2, 0.0), 0.0, 1.2, 0.0);
  EXPECT_TRUE(std::isnan(c.N_eps));
  EXPECT_TRUE(std::isnan(c.F_val));
}

TEST(WeightedNorm, VanishesOnZero) {
  EXPECT_EQ(n_eps(Field(fx().M.grid()), 10.0), 0.0);
}

TEST(WeightedNorm, WeightIsOneAtOrigin) {
  const Grid g(64.0, 64);
  for (double s : {1.5, 10.0, 1e4}) {
    const Field phi = local_weight(g, s, {});
    EXPECT_EQ(phi[g.size() / 2], 1.0) << s;  // x = 0 sits at index n / 2
  }
}

TEST(WeightedNorm, SuppressesFarLeftMass) {
  const WeightParams w;
  const double s = 10.0, y0 = -4.0 * w.B * std::pow(s, w.theta);
  const Field e = Field::from_function(fx().M.grid(), [=](double y) { return std::exp(-(y - y0) * (y - y0) / 400.0); });
  const double N = n_eps(e, s, w);
  EXPECT_LT(N * N / inner(e, e), 0.2);
}

TEST(WeightedNorm, RejectsBadParameters) {
  const Field e(Grid(64.0, 64));
  EXPECT_THROW(n_eps(e, 1.0), Error);
  EXPECT_THROW(n_eps(e, 10.0, WeightParams{0.62, 0.0}), Error);
  try {
    validate(WeightParams{0.7, 100.0});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), "bad theta");
    EXPECT_NE(std::string(err.what()).find("(3/5, 2/3)"), std::string::npos);
  }
}

TEST(FunctionalF, VanishesOnZero) {
  const Modulator& M = fx().M;
  EXPECT_EQ(functional_F(Field(M.grid()), M.Q_b(-0.1), 10.0), 0.0);
}

TEST(FunctionalF, QuadraticPartDominatesForSmallEps) {
  const Modulator& M = fx().M;
  std::mt19937_64 rng(7);
  const Field e = fwtest::random_bumps(M.grid(), rng);
  const Field Qb = M.Q_b(-0.1);
  std::vector<double> r;
  for (double d : {1e-1, 1e-2, 1e-3}) r.push_back(functional_F(d * e, Qb, 10.0) / (d * d));
  // the cubic term makes the error shrink by about the step ratio
  const double d1 = std::abs(r[0] - r[1]), d2 = std::abs(r[1] - r[2]);
  EXPECT_GT(d1 / d2, 8.0);
  EXPECT_LT(d2, 1e-2 * std::abs(r[2]));
}

TEST(FunctionalF, CoerciveOnAdmissibleRemainders) {
  for (double s : {10.0, 50.0}) {
    const FCoercivityReport rep = f_coercivity_check(fx().M, s, 50);
    RecordProperty("kappa_s" + std::to_string(static_cast<int>(s)), std::to_string(rep.kappa));
    std::printf("s %g kappa %.4f raw min %.4f mean %.4f\n", s, rep.kappa, rep.raw_min, rep.mean);
    EXPECT_GT(rep.kappa, 0.0) << "s " << s;
  }
}

TEST(Rates, NeedFiveFrames) {
  std::vector<ModulationFrame> fr(4);
  for (std::size_t i = 0; i < fr.size(); ++i) fr[i].t = static_cast<double>(i);
  try {
    modulation_rates(fr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "series too short");
  }
}

TEST(Rates, RejectRepeatedTimes) {
  std::vector<ModulationFrame> fr(5);
  EXPECT_THROW(modulation_rates(fr), Error);
}

TEST(Rates, ExactQuadraticsAreDifferentiatedExactly) {
  std::vector<ModulationFrame> fr(6);
  for (std::size_t i = 0; i < fr.size(); ++i) {
    const double t = 0.1 * static_cast<double>(i * i + 1);  // nonuniform
    fr[i].t = t;
    fr[i].lambda = 1.0;
    fr[i].x = t * t;
    fr[i].b = 0.0;
  }
  for (const RatesRow& r : modulation_rates(fr)) {
    EXPECT_NEAR(r.x_s_over_lambda, 2.0 * r.t, 1e-12);
    EXPECT_NEAR(r.s, r.t - 0.1, 1e-12);
  }
}

TEST(Rates, SolitonMovesAtUnitSpeed) {
  const Modulator& M = fx().M;
  const Grid G(256.0, 1 << 13);
  const Field u = scaled_soliton(G, 1.0, 0.0);
  const EvolutionState st = initial_state(u);
  std::vector<ModulationFrame> frames{M.decompose(u, st.energy0, 1.0, 0.0, 0.0)};
  EvolveControls c;
  c.cfl = 0.2;
  c.record_dt = 0.125;
  c.on_record = [&](const EvolutionState& s) { frames.push_back(M.decompose(s.u, st.energy0, 1.0, s.t, s.t)); };
  evolve_adaptive(st, 1.0, c);
  ASSERT_EQ(frames.size(), 9u);
  for (const RatesRow& r : modulation_rates(frames)) EXPECT_LT(r.defect_x, 1e-4) << "t " << r.t;
}
