#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "fracwave/evolve.hpp"
#include "fracwave/fit.hpp"
#include "fracwave/modulation.hpp"

namespace fracwave {

enum class Direction { forward, backward };

inline const char* to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

inline Direction parse_direction(const std::string& s) {
  if (s == "forward") return Direction::forward;
  if (s == "backward") return Direction::backward;
  throw Error(ErrorKind::config, "bad direction", "direction must be forward or backward, got '" + s + "'");
}

/// Minimal-mass blow-up run started at T_n = 1/n from a rescaled, slightly
/// shrunk ground state sitting at x_in = -ln n.
struct BlowupConfig {
  int n = 64;
  double lambda_in = 0.0;  // 0 means 1/n
  Direction direction = Direction::forward;
  double t_stop = 0.25;    // forward end time
  double t_min = 0.0;      // backward end time; 0 means T_n / 64
  double box = 8.0;        // physical box length
  double resolution = 32.0;      // lambda_in / dx at start (>= 20)
  double regrid_above = 64.0;    // forward: halve the grid when lambda / dx exceeds this
  std::size_t min_points = 256;
  int records_per_doubling = 8;  // record times T_n 2^{k / records_per_doubling}
  double cfl = 1.0;
  double energy_budget = 1e-10;
  WeightParams weights;

  double T() const { return 1.0 / n; }
  double lambda0() const { return lambda_in > 0.0 ? lambda_in : 1.0 / n; }
  double x_in() const { return -std::log(static_cast<double>(n)); }
  double t_end() const {
    if (direction == Direction::forward) return t_stop;
    return t_min > 0.0 ? t_min : T() / 64.0;
  }
  /// Box center: halfway between the start and the predicted end position ln t.
  double center() const { return 0.5 * (x_in() + std::log(t_end())); }
  std::size_t grid_points() const {
    const double need = box * resolution / lambda0();
    std::size_t m = 2;
    while (static_cast<double>(m) < need) m <<= 1;
    return std::max(m, min_points);
  }
};

/// Parameter checks that do not depend on the regime (n may be 1 here).
inline void validate_window(const BlowupConfig& c) {
  if (c.n < 1) throw Error(ErrorKind::config, "bad n", "n must be a positive integer");
  const double nn = c.n, tol = std::pow(nn, -13.0 / 12.0);
  if (!(std::abs(c.lambda0() - 1.0 / nn) <= tol))
    throw Error(ErrorKind::config, "bad lambda_in",
                "lambda_in must lie within n^{-13/12} = " + std::to_string(tol) + " of 1/n");
  if (!(c.box > 0.0)) throw Error(ErrorKind::config, "bad box", "box length must be positive");
  if (!(c.resolution >= 20.0))
    throw Error(ErrorKind::config, "bad resolution", "the grid needs lambda_in >= 20 dx");
  validate(c.weights);
}

inline void validate(const BlowupConfig& c) {
  validate_window(c);
  if (c.n < 10) throw Error(ErrorKind::config, "bad n", "n must be at least 10, got " + std::to_string(c.n));
  if (c.direction == Direction::forward && !(c.t_stop > c.T()))
    throw Error(ErrorKind::config, "bad t_stop", "t_stop must exceed T_n = 1/n");
  if (c.direction == Direction::backward && !(c.t_end() > 0.0 && c.t_end() < c.T()))
    throw Error(ErrorKind::config, "bad t_min", "t_min must lie in (0, 1/n)");
  if (c.records_per_doubling < 1) throw Error(ErrorKind::config, "bad cadence", "records_per_doubling must be >= 1");
  if (!(c.regrid_above > c.resolution)) throw Error(ErrorKind::config, "bad regrid", "regrid_above must exceed resolution");
  if (!(c.cfl > 0.0)) throw Error(ErrorKind::config, "bad cfl", "cfl must be positive");
  if (!(c.energy_budget > 0.0)) throw Error(ErrorKind::config, "bad energy budget", "energy_budget must be positive");
}

struct InitialData {
  Field u;           // on the experiment grid, coordinates relative to center
  double center = 0.0;
  double a = 0.0;    // shrink factor
  double lambda = 0.0;
  double x = 0.0;    // physical position
  double energy = 0.0;
  double mass = 0.0;
};

/// Small root of a (1 - 5a/2 + 2a^2 - a^3/2) int Q^2 = p0 lambda, i.e.
/// E((1 - a) lambda^{-1/2} Q(./lambda)) = p0 expanded exactly in a.
inline double shrink_factor(double int_q2, double p0, double lambda) {
  const double rhs = p0 * lambda;
  double a = rhs / int_q2;
  for (int it = 0; it < 60; ++it) {
    const double f = a * (1 - 2.5 * a + 2 * a * a - 0.5 * a * a * a) * int_q2 - rhs;
    const double fp = (1 - 5 * a + 6 * a * a - 2 * a * a * a) * int_q2;
    const double da = f / fp;
    a -= da;
    if (!(std::abs(a) < 0.5))
      throw Error(ErrorKind::numerical, "no small root", "Newton for the shrink factor left |a| < 1/2");
    if (std::abs(da) < 1e-16) break;
  }
  return a;
}

inline InitialData build_initial_data(const BlowupConfig& cfg, const Modulator& M) {
  validate_window(cfg);
  InitialData d;
  d.lambda = cfg.lambda0();
  d.x = cfg.x_in();
  d.center = cfg.n == 1 ? 0.0 : cfg.center();
  d.a = shrink_factor(inner(M.Q(), M.Q()), M.p0(), d.lambda);
  const Grid G(cfg.box, cfg.grid_points());
  d.u = M.assemble(G, d.lambda, d.x - d.center, 0.0);
  d.u *= 1.0 - d.a;
  d.energy = energy(d.u);
  d.mass = mass(d.u);
  return d;
}

struct BlowupFrame {
  ModulationFrame m;  // x is physical
  double rho = 0.0;   // ||D^{1/2} u|| t^{1/2} / ||D^{1/2} Q||
  double mass = 0.0;
  double energy = 0.0;
  std::size_t grid_points = 0;
  std::size_t steps = 0;
};

struct BlowupReport {
  LineFit lambda_fit;                 // lambda vs t
  LineFit x_fit;                      // x vs ln t
  double x_drift_min = 0.0, x_drift_max = 0.0;  // x - ln t
  double lambda_over_t_min = 0.0, lambda_over_t_max = 0.0;
  double rho_min = 0.0, rho_max = 0.0;
  double dxdt_lambda_min = 0.0, dxdt_lambda_max = 0.0;
  double defect_lambda_ratio_max = 0.0;  // max |lambda_s/lambda + b| / (b^2 + N)
  double b_plus_lambda_max = 0.0;        // max |b + lambda| / lambda
  double b_defect_ratio_max = 0.0;       // max |b_s + b^2| / b^2
  double eps_transfer_C = 0.0;           // max ||eps||^2_{H^1/2} / (|b| + |int u0^2 - int Q^2|)
  double N_min = 0.0, N_max = 0.0;
  double mass_in = 0.0, mass_Q = 0.0, mass_drift_max = 0.0;
  double energy_drift_max = 0.0;
  double lambda_span = 0.0;  // max lambda / min lambda
  double a_in = 0.0;
  std::size_t frames = 0;
  std::size_t steps = 0;
  bool partial = false;
  std::string stop_reason;
  bool mass_below_threshold() const { return mass_in < mass_Q; }
};

struct BlowupResult {
  BlowupConfig config;
  std::vector<BlowupFrame> frames;
  std::vector<RatesRow> rates;
  std::vector<SeriesRow> series;
  BlowupReport report;
};

namespace detail {
inline void fill_report(BlowupResult& r, const Modulator& M, const InitialData& d) {
  BlowupReport& rep = r.report;
  const auto& F = r.frames;
  rep.frames = F.size();
  rep.a_in = d.a;
  rep.mass_in = d.mass;
  rep.mass_Q = mass(M.Q());
  if (F.empty()) return;
  std::vector<double> t, lam, lnt, x;
  const double inf = std::numeric_limits<double>::infinity();
  rep.x_drift_min = rep.lambda_over_t_min = rep.rho_min = rep.N_min = inf;
  rep.x_drift_max = rep.lambda_over_t_max = rep.rho_max = rep.N_max = -inf;
  const double mdef = std::abs(2.0 * (d.mass - rep.mass_Q));
  double lmin = inf, lmax = 0.0;
  for (const BlowupFrame& f : F) {
    const ModulationFrame& m = f.m;
    t.push_back(m.t);
    lam.push_back(m.lambda);
    lnt.push_back(std::log(m.t));
    x.push_back(m.x);
    rep.x_drift_min = std::min(rep.x_drift_min, m.x - std::log(m.t));
    rep.x_drift_max = std::max(rep.x_drift_max, m.x - std::log(m.t));
    rep.lambda_over_t_min = std::min(rep.lambda_over_t_min, m.lambda / m.t);
    rep.lambda_over_t_max = std::max(rep.lambda_over_t_max, m.lambda / m.t);
    rep.rho_min = std::min(rep.rho_min, f.rho);
    rep.rho_max = std::max(rep.rho_max, f.rho);
    if (std::isfinite(m.N_eps)) {
      rep.N_min = std::min(rep.N_min, m.N_eps);
      rep.N_max = std::max(rep.N_max, m.N_eps);
    }
    rep.b_plus_lambda_max = std::max(rep.b_plus_lambda_max, std::abs(m.b + m.lambda) / m.lambda);
    rep.eps_transfer_C = std::max(rep.eps_transfer_C, m.eps_h_half_sq / (std::abs(m.b) + mdef));
    rep.mass_drift_max = std::max(rep.mass_drift_max, std::abs(f.mass - d.mass) / d.mass);
    rep.energy_drift_max = std::max(rep.energy_drift_max, std::abs(f.energy - d.energy) / std::abs(d.energy));
    lmin = std::min(lmin, m.lambda);
    lmax = std::max(lmax, m.lambda);
  }
  rep.lambda_span = lmax / lmin;
  if (F.size() >= 2) {
    rep.lambda_fit = fit_line(t, lam);
    rep.x_fit = fit_line(lnt, x);
  }
  if (F.size() >= 5) {
    std::vector<ModulationFrame> mf;
    for (const BlowupFrame& f : F) mf.push_back(f.m);
    r.rates = modulation_rates(mf);
    rep.dxdt_lambda_min = inf;
    rep.dxdt_lambda_max = -inf;
    for (std::size_t i = 0; i < r.rates.size(); ++i) {
      const RatesRow& q = r.rates[i];
      rep.dxdt_lambda_min = std::min(rep.dxdt_lambda_min, q.x_s_over_lambda);
      rep.dxdt_lambda_max = std::max(rep.dxdt_lambda_max, q.x_s_over_lambda);
      const double N = std::isfinite(F[i].m.N_eps) ? F[i].m.N_eps : 0.0;
      rep.defect_lambda_ratio_max = std::max(rep.defect_lambda_ratio_max, q.defect_lambda / (q.b * q.b + N));
      rep.b_defect_ratio_max = std::max(rep.b_defect_ratio_max, q.defect_b / (q.b * q.b));
    }
  }
}
}  // namespace detail

/// Evolves the initial data over the configured window, decomposing at every
/// record time. Forward runs coarsen the grid as the soliton widens; backward
/// runs stop once lambda < 20 dx. A detected blow-up ends the run with a
/// partial series.
inline BlowupResult run_blowup(const BlowupConfig& cfg, const Modulator& M,
                               const std::function<void(const BlowupFrame&)>& on_frame = {}) {
  validate(cfg);
  const InitialData d = build_initial_data(cfg, M);
  BlowupResult res;
  res.config = cfg;
  const double kinQ = std::sqrt(seminorm_half_sq(M.Q()));
  const double T = cfg.T(), t_end = cfg.t_end();
  const bool fwd = cfg.direction == Direction::forward;

  std::vector<double> marks;
  for (int k = 1;; ++k) {
    const double e = (fwd ? 1.0 : -1.0) * static_cast<double>(k) / cfg.records_per_doubling;
    const double tk = T * std::exp2(e);
    if (fwd ? tk >= t_end * (1 - 1e-12) : tk <= t_end * (1 + 1e-12)) break;
    marks.push_back(tk);
  }
  marks.push_back(t_end);

  EvolutionState st = initial_state(d.u, {}, T);
  auto make_frame = [&](const EvolutionState& s, const ModulationFrame* prev) {
    double lg = d.lambda, xg = d.x - d.center;
    if (prev) {
      const double dt = s.t - prev->t;
      lg = prev->lambda + dt * d.energy / M.p0();
      xg = prev->x - d.center + dt / prev->lambda;
    }
    BlowupFrame f;
    f.m = M.decompose(s.u, d.energy, lg, xg, s.t);
    f.m.x += d.center;
    f.rho = std::sqrt(seminorm_half_sq(s.u)) * std::sqrt(s.t) / kinQ;
    f.mass = mass(s.u);
    f.energy = energy(s.u);
    f.grid_points = s.u.size();
    f.steps = s.step_count;
    return f;
  };
  auto push = [&](BlowupFrame f) {
    if (on_frame) on_frame(f);
    res.frames.push_back(std::move(f));
  };
  push(make_frame(st, nullptr));

  EvolveControls c;
  c.cfl = cfg.cfl;
  c.energy_budget = cfg.energy_budget;
  c.ceiling = 1e3 * norm_inf(d.u);
  res.report.stop_reason = "window complete";
  for (double tk : marks) {
    EvolutionResult er = evolve_adaptive(st, tk, c);
    for (SeriesRow row : er.series) res.series.push_back(row);
    st = er.state;
    if (er.blowup) {
      res.report.partial = true;
      res.report.stop_reason = er.message;
      break;
    }
    push(make_frame(st, &res.frames.back().m));
    const double lam = res.frames.back().m.lambda, dx = st.u.grid().dx();
    if (fwd) {
      if (lam / dx > cfg.regrid_above && st.u.size() / 2 >= cfg.min_points) st.u = resample(st.u, st.u.size() / 2);
    } else if (lam < 20.0 * dx) {
      res.report.stop_reason = "resolution loss";
      break;
    }
  }
  res.report.steps = st.step_count;
  detail::fill_report(res, M, d);
  return res;
}

struct SweepRow {
  int n = 0;
  bool ok = false;
  std::string error;
  BlowupReport report;
  double N_at_matched = std::numeric_limits<double>::quiet_NaN();  // N(eps) at the frame closest to t_match
};

/// Runs one blow-up per n (forward, other settings from base) on up to
/// `threads` workers; rows come back ordered as n_list. Failures are recorded
/// per row.
inline std::vector<SweepRow> sweep(const std::vector<int>& n_list, const BlowupConfig& base, const Modulator& M,
                                   unsigned threads = 1, double t_match = 0.0625) {
  auto one = [&](int n) {
    SweepRow row;
    row.n = n;
    try {
      BlowupConfig c = base;
      c.n = n;
      c.lambda_in = 0.0;
      const BlowupResult r = run_blowup(c, M);
      row.report = r.report;
      double best = std::numeric_limits<double>::infinity();
      for (const BlowupFrame& f : r.frames)
        if (std::abs(std::log(f.m.t / t_match)) < best) {
          best = std::abs(std::log(f.m.t / t_match));
          row.N_at_matched = f.m.N_eps;
        }
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  };
  std::vector<SweepRow> rows(n_list.size());
  const std::size_t w = std::max(1u, threads);
  for (std::size_t i0 = 0; i0 < n_list.size(); i0 += w) {
    std::vector<std::future<SweepRow>> jobs;
    for (std::size_t i = i0; i < std::min(n_list.size(), i0 + w); ++i)
      jobs.push_back(std::async(w > 1 ? std::launch::async : std::launch::deferred, one, n_list[i]));
    for (std::size_t i = 0; i < jobs.size(); ++i) rows[i0 + i] = jobs[i].get();
  }
  return rows;
}

}  // namespace fracwave
