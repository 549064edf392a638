#include <gtest/gtest.h>

#include <cmath>

#include "fracwave/evolve.hpp"
#include "support.hpp"

using namespace fracwave;

namespace {
const GroundState& soliton_gs() { return fwtest::ground_state(64.0, 1 << 11); }

double kinetic(const Field& u) { return 0.5 * seminorm_half_sq(u); }

Field bump(const Grid& g, double amp, double x0) {
  return Field::from_function(g, [=](double x) { return amp * std::exp(-(x - x0) * (x - x0)); });
}

double rel_l2(const Field& a, const Field& b) { return norm_l2(a - b) / norm_l2(b); }

struct SolitonRun {
  EvolutionResult r;
  EvolutionState start;
};

const SolitonRun& soliton_run() {
  static SolitonRun run = [] {
    SolitonRun s;
    s.start = initial_state(soliton_gs().Q);
    EvolveControls c;
    c.cfl = 0.08;
    c.record_dt = 0.5;
    s.r = evolve_adaptive(s.start, 10.0, c);
    return s;
  }();
  return run;
}
}  // namespace

TEST(Step, ZeroStaysZero) {
  Grid g(32.0, 256);
  EvolutionState s = initial_state(Field(g));
  s = step(s, 0.01);
  EXPECT_EQ(norm_inf(s.u), 0.0);
  EXPECT_DOUBLE_EQ(s.t, 0.01);
  EvolveControls c;
  c.fixed_dt = 0.01;
  EXPECT_EQ(norm_inf(evolve_adaptive(s, 1.0, c).state.u), 0.0);
}

TEST(Step, RejectsNonPositiveDt) {
  Grid g(32.0, 256);
  EXPECT_THROW(step(initial_state(Field(g)), 0.0), Error);
}

TEST(Step, CeilingRaisesBlowupError) {
  const Field& Q = soliton_gs().Q;
  try {
    step(initial_state(Q), 1e-3, Flow{}, 0.5 * norm_inf(Q));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::blowup);
    EXPECT_EQ(e.code(), "blow-up detected");
  }
}

TEST(Evolve, TravelingWaveKeepsItsShape) {
  const auto& run = soliton_run();
  const Field& Q = soliton_gs().Q;
  EXPECT_NEAR(run.r.state.t, 10.0, 1e-12);
  EXPECT_LT(norm_inf(run.r.state.u - translate(Q, 10.0)), 1e-5 * norm_inf(Q));
}

TEST(Evolve, TravelingWaveConservesMassAndEnergy) {
  const auto& run = soliton_run();
  const SeriesRow& last = run.r.series.back();
  EXPECT_LT(std::abs(last.mass - run.start.mass0) / run.start.mass0, 1e-8);
  // E(Q) vanishes on the line, so energy drift is measured against the kinetic part.
  EXPECT_LT(std::abs(last.energy - run.start.energy0) / kinetic(soliton_gs().Q), 1e-7);
}

TEST(Evolve, PerStepMassChangeWithinBudget) {
  const auto& run = soliton_run();
  const SeriesRow& last = run.r.series.back();
  const double per_step = std::abs(last.mass - run.start.mass0) / run.start.mass0 / static_cast<double>(last.steps);
  EXPECT_LT(per_step, 1e-10);
}

TEST(Evolve, RecordsAtRequestedCadence) {
  const auto& run = soliton_run();
  ASSERT_EQ(run.r.series.size(), 20u);
  for (std::size_t k = 0; k < run.r.series.size(); ++k) EXPECT_NEAR(run.r.series[k].t, 0.5 * (k + 1), 1e-12);
  EXPECT_FALSE(run.r.blowup);
}

TEST(Evolve, FourthOrderInTime) {
  const Field& Q = fwtest::ground_state(64.0, 1 << 11).Q;
  const Field u0 = Q + bump(Q.grid(), 0.2, 4.0);
  auto run = [&](double dt) {
    EvolveControls c;
    c.fixed_dt = dt;
    return evolve_adaptive(initial_state(u0), 1.0, c).state.u;
  };
  const Field ref = run(1.25e-4);
  const double e1 = norm_l2(run(2e-3) - ref), e2 = norm_l2(run(1e-3) - ref);
  EXPECT_GE(e1 / e2, 8.0) << e1 << " " << e2;
}

TEST(Evolve, ForwardThenBackwardReturnsToStart) {
  const Field& Q = soliton_gs().Q;
  const Field u0 = Q + bump(Q.grid(), 0.1, 3.0);
  EvolveControls c;
  c.cfl = 0.1;
  auto fwd = evolve_adaptive(initial_state(u0), 1.0, c);
  auto back = evolve_adaptive(fwd.state, 0.0, c);
  EXPECT_NEAR(back.state.t, 0.0, 1e-12);
  EXPECT_LT(rel_l2(back.state.u, u0), 1e-6);
}

TEST(Evolve, BackwardSeriesRunsDownInTime) {
  const Field& Q = soliton_gs().Q;
  EvolveControls c;
  c.cfl = 0.1;
  c.record_dt = 0.25;
  auto r = evolve_adaptive(initial_state(Q, {}, 1.0), 0.0, c);
  ASSERT_EQ(r.series.size(), 4u);
  EXPECT_NEAR(r.series.front().t, 0.75, 1e-12);
  EXPECT_NEAR(r.series.back().t, 0.0, 1e-12);
  // backward in time the wave sits at Q(x + 1)
  EXPECT_LT(norm_inf(r.state.u - translate(Q, -1.0)), 1e-5 * norm_inf(Q));
}

TEST(Evolve, ScalingCovariance) {
  const GroundState& gs = soliton_gs();
  const Field u0 = gs.Q + bump(gs.Q.grid(), 0.1, 3.0);
  const double T = 0.5;
  EvolveControls c;
  c.cfl = 0.1;
  const Field base = evolve_adaptive(initial_state(u0), T, c).state.u;
  for (double lam : {0.5, 2.0}) {
    // u_lam(t, x) = lam^{-1/2} u(t / lam^2, x / lam): same samples on a box of length lam L
    const Grid g(lam * u0.grid().length(), u0.size());
    const Field ul(g, (std::pow(lam, -0.5) * u0).data());
    const Field out = evolve_adaptive(initial_state(ul), lam * lam * T, c).state.u;
    const Field expect(g, (std::pow(lam, -0.5) * base).data());
    EXPECT_LT(rel_l2(out, expect), 1e-6) << "lambda " << lam;
  }
}

TEST(Evolve, BenjaminOnoSolitonTravels) {
  // periodic counterpart of 2 / (1 + x^2)
  const GroundState q = petviashvili(2, 1.0, Grid(128.0, 1 << 11), 1e-12, 2000);
  EXPECT_NEAR(norm_inf(q.Q), 2.0, 1e-2);
  EvolveControls c;
  c.cfl = 0.1;
  Flow f;
  f.p = 2;
  auto r = evolve_adaptive(initial_state(q.Q, f), 5.0, c, f);
  EXPECT_LT(norm_inf(r.state.u - translate(q.Q, 5.0)), 1e-5 * norm_inf(q.Q));
}

TEST(Evolve, StopsAtCeilingWithPartialRun) {
  const Field& Q = soliton_gs().Q;
  EvolveControls c;
  c.ceiling = 0.99 * norm_inf(Q);
  auto r = evolve_adaptive(initial_state(Q), 1.0, c);
  EXPECT_TRUE(r.blowup);
  EXPECT_EQ(r.state.t, 0.0);
  EXPECT_TRUE(r.series.empty());
}

TEST(Evolve, ZeroEnergyBudgetStalls) {
  const Field& Q = soliton_gs().Q;
  EvolveControls c;
  c.energy_budget = 0.0;
  try {
    evolve_adaptive(initial_state(Q + bump(Q.grid(), 0.1, 2.0)), 1.0, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "stalled");
  }
}

TEST(Evolve, RejectsEmptyInterval) {
  const Field& Q = soliton_gs().Q;
  EXPECT_THROW(evolve_adaptive(initial_state(Q), 0.0, EvolveControls{}), Error);
}

TEST(Evolve, RejectsUnsupportedPower) {
  Flow f;
  f.p = 5;
  EXPECT_THROW(step(initial_state(soliton_gs().Q), 1e-3, f), Error);
}

TEST(CleanWindow, HalfBoxOverSpeed) {
  EXPECT_DOUBLE_EQ(clean_window(64.0, 2.0), 16.0);
  EXPECT_TRUE(std::isinf(clean_window(64.0, 0.0)));
}
