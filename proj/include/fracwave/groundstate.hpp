#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fracwave/fit.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

/// Converged solution of D^alpha Q + Q - Q^p = 0 together with its diagnostics.
struct GroundState {
  Field Q;
  int p = 3;
  double alpha = 1.0;
  double tolerance = 0.0;
  double residual_norm = 0.0;  // ||D^alpha Q + Q - Q^p||_2
  double int_q2 = 0.0;         // int Q^2
  double energy = 0.0;         // energy of the matching gBO flow
  double decay_coefficient = 0.0;  // fitted c in Q ~ c / |y|^{1+alpha}
  double decay_exponent = 0.0;     // fitted exponent
  double stabilizer = 1.0;         // Petviashvili factor M at exit
  int iterations = 0;

  const Grid& grid() const { return Q.grid(); }
};

/// M(u) = 1/2 int u^2
inline double mass(const Field& f) { return 0.5 * inner(f, f); }

/// E(u) = 1/2 int |D^{1/2} u|^2 - 1/4 int u^4
inline double energy(const Field& f) {
  return 0.5 * seminorm_half_sq(f) - 0.25 * integral(pow(f, 4));
}

/// Energy of the gBO flow with dispersion D^alpha and power p:
/// 1/2 int |D^{alpha/2} u|^2 - int u^{p+1} / (p+1).
inline double energy_general(const Field& f, int p, double alpha) {
  const Field d = frac_deriv(f, 0.5 * alpha);
  return 0.5 * inner(d, d) - integral(pow(f, p + 1)) / (p + 1);
}

/// Weinstein functional (int |D^{1/2}v|^2)(int v^2) / int v^4.
inline double weinstein_W(const Field& v) {
  const double q4 = integral(pow(v, 4));
  if (!(q4 > std::numeric_limits<double>::min()))
    throw Error(ErrorKind::numerical, "zero L4 norm", "weinstein_W needs a nonzero function");
  return seminorm_half_sq(v) * inner(v, v) / q4;
}

/// Periodic images of an inverse-square tail: sum over m != 0 of 1/(y + mL)^2,
/// minus nothing else, i.e. (pi/L)^2 / sin^2(pi y/L) - 1/y^2.
inline Field image_sum(const Grid& g) {
  const double L = g.length();
  const double a = std::numbers::pi / L;
  return Field::from_function(g, [a, L](double y) {
    if (std::abs(y) < 1e-3) return a * a / 3.0 + a * a * a * a * y * y / 15.0;
    const double s = std::sin(a * y);
    return a * a / (s * s) - 1.0 / (y * y);
  });
}

/// Coefficient c_alpha of the algebraic tail Q ~ c_alpha / |y|^{1+alpha}, from
/// Q = (D^alpha + 1)^{-1} Q^p and the kernel asymptotics of the resolvent.
inline double tail_coefficient(const Field& Q, int p, double alpha) {
  return std::tgamma(1.0 + alpha) * std::sin(0.5 * std::numbers::pi * alpha) / std::numbers::pi *
         integral(pow(Q, p));
}

/// Q with the periodic images of its 1/y^2 tail removed (alpha = 1 only;
/// other orders are returned unchanged). Approximates the real-line Q on the
/// box to O(L^{-4}).
inline Field unfolded(const GroundState& gs) {
  if (gs.alpha != 1.0) return gs.Q;
  Field out = gs.Q;
  out.axpy(-gs.decay_coefficient, image_sum(gs.grid()));
  return out;
}

namespace detail {
inline Field symmetrize(const Field& f) {
  Field r = reflect(f);
  r += f;
  r *= 0.5;
  return r;
}

inline void fit_decay(GroundState& gs) {
  const Field q = unfolded(gs);
  const Grid& g = gs.grid();
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double y = g.x(i);
    if (y >= 16.0 && y <= g.length() / 16.0 && q[i] > 0.0) {
      lx.push_back(std::log(y));
      ly.push_back(std::log(q[i]));
    }
  }
  if (lx.size() < 2) {
    gs.decay_exponent = std::nan("");
    return;
  }
  const LineFit lf = fit_line(lx, ly);
  gs.decay_exponent = -lf.slope;
}
}  // namespace detail

/// Petviashvili iteration for D^alpha Q + Q = Q^p, seeded with 2/(1+x^2).
/// Each iterate is symmetrized to remove the translation mode.
inline GroundState petviashvili(int p, double alpha, const Grid& grid, double tol, int max_iter) {
  if (p != 2 && p != 3) throw Error(ErrorKind::config, "bad power", "p must be 2 or 3");
  if (!(alpha > 0.5 && alpha <= 2.0)) throw Error(ErrorKind::config, "bad order", "alpha must lie in (0.5, 2]");
  if (!(tol > 0.0)) throw Error(ErrorKind::config, "bad tolerance", "tol must be positive");
  if (max_iter < 1) throw Error(ErrorKind::config, "bad iteration budget", "max_iter must be positive");

  const std::size_t nh = grid.spectrum_size();
  std::vector<double> sym(nh);
  for (std::size_t k = 0; k < nh; ++k) sym[k] = 1.0 + std::pow(grid.xi(k), alpha);
  const double gamma = static_cast<double>(p) / (p - 1);
  const std::size_t n = grid.size();
  auto weight = [n](std::size_t k) { return (k == 0 || k == n / 2) ? 1.0 : 2.0; };

  GroundState gs;
  gs.p = p;
  gs.alpha = alpha;
  gs.tolerance = tol;
  Field Q = Field::from_function(grid, [](double x) { return 2.0 / (1.0 + x * x); });
  for (int it = 1; it <= max_iter; ++it) {
    Q = detail::symmetrize(Q);
    const Spectrum qh = forward(Q);
    Spectrum nh_ = forward(pow(Q, p));
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < nh; ++k) {
      num += weight(k) * sym[k] * std::norm(qh[k]);
      den += weight(k) * (std::conj(qh[k]) * nh_[k]).real();
    }
    const double M = num / den;
    if (!(M >= 1e-3 && M <= 1e3))
      throw Error(ErrorKind::numerical, "diverged", "Petviashvili stabilizer left [1e-3, 1e3] at iteration " +
                                                        std::to_string(it));
    const double scale = std::pow(M, gamma);
    for (std::size_t k = 0; k < nh; ++k) nh_[k] *= scale / sym[k];
    Q = inverse(std::move(nh_), grid);

    Spectrum rh = forward(Q);
    for (std::size_t k = 0; k < nh; ++k) rh[k] *= sym[k];
    Field res = inverse(std::move(rh), grid);
    res -= pow(Q, p);
    const double r = norm_l2(res), qn = norm_l2(Q);
    gs.residual_norm = r;
    gs.stabilizer = M;
    gs.iterations = it;
    if (!Q.all_finite()) throw Error(ErrorKind::numerical, "diverged", "non-finite Petviashvili iterate");
    if (r < tol * qn && std::abs(M - 1.0) < tol) {
      gs.Q = std::move(Q);
      gs.int_q2 = inner(gs.Q, gs.Q);
      gs.energy = energy_general(gs.Q, p, alpha);
      gs.decay_coefficient = tail_coefficient(gs.Q, p, alpha);
      detail::fit_decay(gs);
      return gs;
    }
  }
  throw Error(ErrorKind::numerical, "max_iter",
              "Petviashvili did not reach tol " + std::to_string(tol) + " in " + std::to_string(max_iter) +
                  " iterations (residual " + std::to_string(gs.residual_norm) + ")");
}

/// Recomputes all GroundState metadata for an externally supplied Q
/// (e.g. loaded from a checkpoint).
inline GroundState ground_state_from_field(Field Q, int p = 3, double alpha = 1.0) {
  GroundState gs;
  gs.p = p;
  gs.alpha = alpha;
  const Field d = frac_deriv(Q, alpha);
  Field res = d + Q - pow(Q, p);
  gs.residual_norm = norm_l2(res);
  gs.Q = std::move(Q);
  gs.int_q2 = inner(gs.Q, gs.Q);
  gs.energy = energy_general(gs.Q, p, alpha);
  gs.decay_coefficient = tail_coefficient(gs.Q, p, alpha);
  detail::fit_decay(gs);
  return gs;
}

struct IdentityCheck {
  std::string name;
  double defect = 0.0;  // relative to int Q^2
  bool flagged = false;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  double decay_exponent = 0.0;
  bool decay_flagged = false;
  bool all_ok() const {
    if (decay_flagged) return false;
    for (const auto& c : checks)
      if (c.flagged) return false;
    return true;
  }
};

/// Relative defects of the exact identities satisfied by a ground state:
/// Pohozaev (alpha-1) T - int Q^2 + 2/(p+1) int Q^{p+1} = 0, the energy
/// identity T + int Q^2 = int Q^{p+1}, E(Q) = 0 in the L2-critical case
/// p = 2 alpha + 1, and the algebraic decay exponent 1 + alpha.
/// T = int |D^{alpha/2} Q|^2. Defects above 1e-4 are flagged.
inline IdentityReport verify_identities(const GroundState& gs, double flag_level = 1e-4) {
  const Field& Q = gs.Q;
  const int p = gs.p;
  const double a = gs.alpha;
  const Field d = frac_deriv(Q, 0.5 * a);
  const double T = inner(d, d);
  const double m2 = inner(Q, Q);
  const double np1 = integral(pow(Q, p + 1));
  IdentityReport rep;
  auto add = [&](std::string name, double v) {
    const double rel = std::abs(v) / m2;
    rep.checks.push_back({std::move(name), rel, !(rel <= flag_level)});
  };
  add("pohozaev", (a - 1.0) * T - m2 + 2.0 * np1 / (p + 1));
  add("energy_identity", T + m2 - np1);
  if (std::abs(p - (2.0 * a + 1.0)) < 1e-12) add("energy_zero", 0.5 * T - np1 / (p + 1));
  rep.decay_exponent = gs.decay_exponent;
  const double target = 1.0 + a;
  rep.decay_flagged = !(std::abs(gs.decay_exponent - target) <= 0.1 * target);
  return rep;
}

/// Real-line Q sampled at start + j*step: periodic interpolant minus the tail
/// images inside the box, c/y^2 outside it.
inline std::vector<double> evaluate_real_line(const GroundState& gs, double start, double step,
                                              std::size_t count) {
  std::vector<double> v = interp_uniform(gs.Q, start, step, count);
  const double L = gs.grid().length();
  const double a = std::numbers::pi / L;
  const double c = gs.decay_coefficient;
  const double e = 1.0 + gs.alpha;
  for (std::size_t j = 0; j < count; ++j) {
    const double y = start + step * static_cast<double>(j);
    if (std::abs(y) >= 0.5 * L) {
      v[j] = c / std::pow(std::abs(y), e);
    } else if (gs.alpha == 1.0) {
      double img;
      if (std::abs(y) < 1e-3) {
        img = a * a / 3.0 + a * a * a * a * y * y / 15.0;
      } else {
        const double s = std::sin(a * y);
        img = a * a / (s * s) - 1.0 / (y * y);
      }
      v[j] -= c * img;
    }
  }
  return v;
}

}  // namespace fracwave
