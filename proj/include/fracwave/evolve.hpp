#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fracwave/fft.hpp"
#include "fracwave/groundstate.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

/// u_t + (u^p - D^{alpha-1} H u_x)_x = 0; p = 3, alpha = 1 is mBO and p = 2 is
/// Benjamin-Ono.
struct Flow {
  int p = 3;
  double alpha = 1.0;
  bool dealias = true;
};

struct EvolutionState {
  double t = 0.0;
  Field u;
  double dt = 0.0;
  std::size_t step_count = 0;
  double mass0 = 0.0;
  double energy0 = 0.0;
};

struct SeriesRow {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double max_u = 0.0;
  double min_dt = 0.0;
  std::size_t steps = 0;
};

struct EvolveControls {
  double cfl = 0.5;
  /// Recording cadence; 0 records only the end point.
  double record_dt = 0.0;
  /// Explicit record times (absolute, in the direction of travel); overrides record_dt.
  std::vector<double> record_times;
  /// Largest accepted per-step energy change relative to 1/2 ||D^{alpha/2} u||^2.
  double energy_budget = 1e-9;
  /// ||u||_inf ceiling; 0 means 1e3 * ||u0||_inf.
  double ceiling = 0.0;
  /// > 0 switches off the CFL rule and rejection (convergence studies).
  double fixed_dt = 0.0;
  std::size_t max_steps = 0;
  std::function<void(const EvolutionState&)> on_record;
};

struct EvolutionResult {
  EvolutionState state;
  std::vector<SeriesRow> series;
  bool blowup = false;
  std::string message;
};

/// Time for a structure moving at speed c_max to cross half the box; after
/// that, radiation re-enters through the periodic boundary.
inline double clean_window(double length, double c_max) {
  return c_max > 0.0 ? length / (2.0 * c_max) : std::numeric_limits<double>::infinity();
}

namespace detail {

// Integrating-factor RK4 (Lawson) on the half spectrum. Works in the
// interaction frame of the linear part, whose symbol i xi |xi|^alpha is exact.
class IfRk4 {
 public:
  IfRk4(const Grid& g, const Flow& flow)
      : g_(g), flow_(flow), n_(g.size()), m_(g.spectrum_size()), xi_(m_), lin_(m_), phase_(m_),
        buf_(n_), spec_(m_), k1_(m_), k2_(m_), k3_(m_), k4_(m_), tmp_(m_) {
    if (flow.p != 2 && flow.p != 3)
      throw Error(ErrorKind::config, "bad power", "evolution supports p in {2, 3}");
    if (!(flow.alpha > 0.0 && flow.alpha <= 2.0))
      throw Error(ErrorKind::config, "bad order", "evolution needs alpha in (0, 2]");
    for (std::size_t k = 0; k < m_; ++k) {
      xi_[k] = (k == n_ / 2) ? 0.0 : g.xi(k);
      lin_[k] = xi_[k] * std::pow(g.xi(k), flow.alpha);
    }
  }

  const Grid& grid() const noexcept { return g_; }

  Spectrum to_spectrum(const Field& u) { return forward(u); }

  /// Physical values of s into out (s untouched).
  void to_physical(const Spectrum& s, std::vector<double>& out) {
    spec_ = s;
    out.resize(n_);
    fftw_execute_dft_c2r(PlanCache::instance().c2r(static_cast<int>(n_)),
                         reinterpret_cast<fftw_complex*>(spec_.data()), out.data());
    const double inv = 1.0 / static_cast<double>(n_);
    for (double& a : out) a *= inv;
  }

  /// One step of size dt; `u` must hold the physical values of s on entry and
  /// holds those of the result on exit.
  void step(Spectrum& s, std::vector<double>& u, double dt) {
    set_phase(0.5 * dt);
    nonlinear_from_physical(u, k1_);
    for (std::size_t k = 0; k < m_; ++k) tmp_[k] = phase_[k] * (s[k] + 0.5 * dt * k1_[k]);
    nonlinear(tmp_, k2_);
    for (std::size_t k = 0; k < m_; ++k) tmp_[k] = phase_[k] * s[k] + 0.5 * dt * k2_[k];
    nonlinear(tmp_, k3_);
    for (std::size_t k = 0; k < m_; ++k) tmp_[k] = phase_[k] * (phase_[k] * s[k] + dt * k3_[k]);
    nonlinear(tmp_, k4_);
    for (std::size_t k = 0; k < m_; ++k) {
      const cplx e = phase_[k], e2 = e * e;
      s[k] = e2 * s[k] + dt / 6.0 * (e2 * k1_[k] + 2.0 * e * (k2_[k] + k3_[k]) + k4_[k]);
    }
    to_physical(s, u);
  }

  /// 1/2 int |D^{alpha/2} u|^2 and 1/2 int u^2 from the spectrum.
  std::pair<double, double> quadratic_parts(const Spectrum& s) const {
    double kin = 0.0, l2 = 0.0;
    for (std::size_t k = 0; k < m_; ++k) {
      const double w = (k == 0 || k == n_ / 2) ? 1.0 : 2.0;
      const double a = std::norm(s[k]);
      l2 += w * a;
      kin += w * a * std::pow(g_.xi(k), flow_.alpha);
    }
    const double scale = 0.5 * g_.dx() / static_cast<double>(n_);
    return {scale * kin, scale * l2};
  }

  double energy(const Spectrum& s, const std::vector<double>& u) const {
    double q = 0.0;
    for (double a : u) q += std::pow(a, flow_.p + 1);
    return quadratic_parts(s).first - q * g_.dx() / (flow_.p + 1);
  }

 private:
  using PlanCache = fracwave::detail::PlanCache;

  void set_phase(double h) {
    if (h == phase_h_) return;
    for (std::size_t k = 0; k < m_; ++k) phase_[k] = std::polar(1.0, lin_[k] * h);
    phase_h_ = h;
  }

  void nonlinear(const Spectrum& s, Spectrum& out) {
    to_physical(s, buf_);
    nonlinear_from_physical(buf_, out);
  }

  // -(u^p)_x, with the 2/3 rule applied to the product.
  void nonlinear_from_physical(const std::vector<double>& u, Spectrum& out) {
    for (std::size_t i = 0; i < n_; ++i) buf_[i] = flow_.p == 3 ? u[i] * u[i] * u[i] : u[i] * u[i];
    out.resize(m_);
    fftw_execute_dft_r2c(PlanCache::instance().r2c(static_cast<int>(n_)), buf_.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    const std::size_t cut = flow_.dealias ? n_ / 3 : n_ / 2;
    for (std::size_t k = 0; k < m_; ++k) out[k] = k > cut ? cplx(0.0) : cplx(0.0, -xi_[k]) * out[k];
  }

  Grid g_;
  Flow flow_;
  std::size_t n_, m_;
  std::vector<double> xi_, lin_;
  std::vector<cplx> phase_;
  double phase_h_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> buf_;
  Spectrum spec_, k1_, k2_, k3_, k4_, tmp_;
};

inline double max_abs(const std::vector<double>& u) {
  double m = 0.0;
  for (double a : u) m = std::max(m, std::abs(a));
  return m;
}

inline bool all_finite(const std::vector<double>& u) {
  for (double a : u)
    if (!std::isfinite(a)) return false;
  return true;
}

}  // namespace detail

inline EvolutionState initial_state(const Field& u0, const Flow& flow = {}, double t0 = 0.0) {
  EvolutionState s;
  s.t = t0;
  s.u = u0;
  s.mass0 = mass(u0);
  s.energy0 = energy_general(u0, flow.p, flow.alpha);
  return s;
}

/// One fixed IF-RK4 step. Throws "blow-up detected" (the input state is the
/// last good one) when the result is non-finite or above `ceiling`.
inline EvolutionState step(const EvolutionState& state, double dt, const Flow& flow = {},
                           double ceiling = std::numeric_limits<double>::infinity()) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::config, "bad dt", "step needs dt > 0");
  detail::IfRk4 rk(state.u.grid(), flow);
  Spectrum s = rk.to_spectrum(state.u);
  std::vector<double> u(state.u.values().begin(), state.u.values().end());
  rk.step(s, u, dt);
  if (!detail::all_finite(u) || detail::max_abs(u) > ceiling)
    throw Error(ErrorKind::blowup, "blow-up detected", "at t = " + std::to_string(state.t + dt));
  EvolutionState out = state;
  out.u = Field(state.u.grid(), std::move(u));
  out.t += dt;
  out.dt = dt;
  ++out.step_count;
  return out;
}

/// Adaptive evolution to t_end (either direction). dt is capped by
/// cfl dx / (1 + p ||u||^{p-1}), halved when the per-step energy change exceeds
/// the budget and regrown from the measured energy error. Backward runs use
/// the symmetry u(t, x) -> u(-t, -x). A blow-up stop returns the partial run
/// with `blowup` set.
inline EvolutionResult evolve_adaptive(const EvolutionState& start, double t_end, const EvolveControls& c,
                                       const Flow& flow = {}) {
  if (!(t_end != start.t) || !std::isfinite(t_end))
    throw Error(ErrorKind::config, "bad t_end", "t_end must differ from the current time");
  if (!(c.cfl > 0.0)) throw Error(ErrorKind::config, "bad cfl", "cfl must be positive");
  const double dir = t_end > start.t ? 1.0 : -1.0;
  const double span = std::abs(t_end - start.t);
  const Grid& g = start.u.grid();

  std::vector<double> marks;  // offsets in [0, span] from the start time
  if (!c.record_times.empty()) {
    for (double t : c.record_times) {
      const double o = dir * (t - start.t);
      if (o > 0.0 && o <= span * (1 + 1e-14)) marks.push_back(std::min(o, span));
    }
    std::sort(marks.begin(), marks.end());
  } else if (c.record_dt > 0.0) {
    for (int k = 1; k * c.record_dt < span * (1 - 1e-12); ++k) marks.push_back(k * c.record_dt);
  }
  if (marks.empty() || marks.back() < span) marks.push_back(span);

  detail::IfRk4 rk(g, flow);
  const Field v0 = dir > 0 ? start.u : reflect(start.u);
  Spectrum s = rk.to_spectrum(v0);
  std::vector<double> u(v0.values().begin(), v0.values().end());
  const double ceiling = c.ceiling > 0.0 ? c.ceiling : 1e3 * std::max(detail::max_abs(u), 1e-300);

  EvolutionResult res;
  res.state = start;
  auto snapshot = [&](double offset) {
    EvolutionState st = res.state;
    Field v(g, u);
    st.u = dir > 0 ? std::move(v) : reflect(v);
    st.t = start.t + dir * offset;
    return st;
  };

  double offset = 0.0, e_prev = rk.energy(s, u), min_dt = std::numeric_limits<double>::infinity();
  double dt_ctrl = std::numeric_limits<double>::infinity(), dt_used = 0.0;
  std::size_t steps = start.step_count;
  Spectrum s_try;
  std::vector<double> u_try;
  for (double mark : marks) {
    while (offset < mark) {
      double dt;
      if (c.fixed_dt > 0.0) {
        dt = c.fixed_dt;
      } else {
        const double umax = detail::max_abs(u);
        const double bound = c.cfl * g.dx() / (1.0 + flow.p * std::pow(umax, flow.p - 1));
        // Steps live on the ladder 2^{j/16} so the phase factors are only
        // recomputed when the level changes.
        dt = std::exp2(std::floor(16.0 * std::log2(std::min(bound, dt_ctrl))) / 16.0);
      }
      bool last = false;
      if (offset + dt >= mark * (1 - 1e-15) || mark - offset - dt < 1e-3 * dt) {
        dt = mark - offset;
        last = true;
      }
      for (;;) {
        if (dt < 1e-12 * g.dx())
          throw Error(ErrorKind::numerical, "stalled", "dt fell below 1e-12 dx at t = " +
                                                           std::to_string(start.t + dir * offset));
        s_try = s;
        u_try = u;
        rk.step(s_try, u_try, dt);
        if (!detail::all_finite(u_try) || detail::max_abs(u_try) > ceiling) {
          res.state = snapshot(offset);
          res.state.step_count = steps;
          res.blowup = true;
          res.message = "blow-up detected at t = " + std::to_string(start.t + dir * (offset + dt));
          return res;
        }
        const double e = rk.energy(s_try, u_try);
        if (c.fixed_dt > 0.0) {
          e_prev = e;
          break;
        }
        const double scale = std::max(rk.quadratic_parts(s_try).first, 1e-300);
        const double err = std::abs(e - e_prev);
        if (err <= c.energy_budget * scale) {
          e_prev = e;
          // Local energy error of RK4 scales like dt^5.
          if (!last)
            dt_ctrl = err > 0.0 ? dt * std::min(2.0, 0.9 * std::pow(c.energy_budget * scale / err, 0.2))
                                : 2.0 * dt;
          break;
        }
        dt *= 0.5;
        dt_ctrl = dt;
        last = false;
      }
      std::swap(s, s_try);
      std::swap(u, u_try);
      if (!last) dt_used = dt;
      offset = last ? mark : offset + dt;
      min_dt = std::min(min_dt, dt);
      ++steps;
      if (c.max_steps > 0 && steps - start.step_count >= c.max_steps)
        throw Error(ErrorKind::numerical, "max steps", "evolution exceeded its step budget");
    }
    res.state = snapshot(offset);
    res.state.step_count = steps;
    res.state.dt = dt_used;
    res.series.push_back({res.state.t, rk.quadratic_parts(s).second, rk.energy(s, u), detail::max_abs(u), min_dt, steps});
    min_dt = std::numeric_limits<double>::infinity();
    if (c.on_record) c.on_record(res.state);
  }
  return res;
}

}  // namespace fracwave
