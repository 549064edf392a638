#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fracwave/profile.hpp"

namespace fracwave {

/// Weight exponent and scale of the localized norm; theta must lie in (3/5, 2/3).
struct WeightParams {
  double theta = 0.62;
  double B = 100.0;
};

inline void validate(const WeightParams& w) {
  if (!(w.theta > 0.6 && w.theta < 2.0 / 3.0))
    throw Error(ErrorKind::config, "bad theta",
                "theta must lie in the open interval (3/5, 2/3), got " + std::to_string(w.theta));
  if (!(w.B > 0.0)) throw Error(ErrorKind::config, "bad B", "B must be positive");
}

/// phi(x) = arctan(x) / pi + 1/2
inline double phi_weight(double x) { return std::atan(x) / std::numbers::pi + 0.5; }

/// varphi(s, y) = phi(y / B + |s|^theta) / phi(|s|^theta)
inline Field local_weight(const Grid& g, double s_abs, const WeightParams& w) {
  if (!(s_abs > 1.0)) throw Error(ErrorKind::config, "bad s", "the weight needs |s| > 1");
  validate(w);
  const double st = std::pow(s_abs, w.theta);
  const double norm = phi_weight(st);
  return Field::from_function(g, [&](double y) { return phi_weight(y / w.B + st) / norm; });
}

/// N(eps) = (int |D^{1/2} eps|^2 + eps^2 varphi)^{1/2}
inline double n_eps(const Field& eps, double s_abs, const WeightParams& w = {}) {
  const Field phi = local_weight(eps.grid(), s_abs, w);
  return std::sqrt(seminorm_half_sq(eps) + inner(eps * eps, phi));
}

/// F = int |D^{1/2} eps|^2 + eps^2 varphi - 1/2 ((Q_b + eps)^4 - Q_b^4 - 4 Q_b^3 eps)
inline double functional_F(const Field& eps, const Field& Q_b, double s_abs, const WeightParams& w = {}) {
  eps.check_same(Q_b);
  const Field phi = local_weight(eps.grid(), s_abs, w);
  double quart = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double q = Q_b[i], e = eps[i];
    // (q + e)^4 - q^4 - 4 q^3 e without cancellation
    quart += e * e * (6.0 * q * q + 4.0 * q * e + e * e);
  }
  return seminorm_half_sq(eps) + inner(eps * eps, phi) - 0.5 * quart * eps.grid().dx();
}

struct ModulationFrame {
  double t = 0.0;
  double lambda = 1.0;
  double x = 0.0;
  double b = 0.0;
  Field eps;                  // on the ground-state grid
  double orth_Qprime = 0.0;   // |(eta, Q')|
  double orth_LambdaQ = 0.0;  // |(eta, Lambda Q)|
  double eta_h_half = 0.0;    // ||eta||_{H^{1/2}}
  double eps_h_half_sq = 0.0;
  double local_l2 = 0.0;      // (int eps^2 / (1 + y^2))^{1/2}
  double N_eps = std::numeric_limits<double>::quiet_NaN();  // needs 1/lambda > 1
  double F_val = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
};

/// Decomposes fields near the soliton family as
/// lambda^{1/2} u(lambda y + x) = Q_b(y) + eps(y), b = -E0 lambda / p0,
/// with eta = eps + b P_b orthogonal to Q' and Lambda Q.
///
/// The field u may live on a box smaller than the rescaled ground-state grid.
/// Outside the data the solution is taken to be Q_b (eps = 0), with a smooth
/// blend over the outer 5% of the data box.
class Modulator {
 public:
  Modulator(const LinearizedOperator& L, const Profile& pr, WeightParams w = {})
      : g_(L.grid()), w_(w), P_(pr.P()), p0_(pr.p0) {
    validate(w_);
    const GroundState& gs = L.ground_state();
    Q_ = gs.alpha == 1.0 ? unfolded(gs) : gs.Q;
    dQ_ = deriv(Q_);
    LQ_ = lambda_op(Q_);
    dQ2_ = inner(dQ_, dQ_);
    LQ2_ = inner(LQ_, LQ_);
    q_h_half_ = std::sqrt(norm_h_half_sq(Q_));
  }

  const Grid& grid() const noexcept { return g_; }
  const Field& Q() const noexcept { return Q_; }
  const Field& dQ() const noexcept { return dQ_; }
  const Field& LambdaQ() const noexcept { return LQ_; }
  double p0() const noexcept { return p0_; }
  const WeightParams& weights() const noexcept { return w_; }

  Field P_b(double b) const { return localized_cutoff(g_, b) * P_; }
  Field Q_b(double b) const { return Q_ + b * P_b(b); }

  /// Newton on (lambda, x) zeroing ((eta, Q'), (eta, Lambda Q)); the Jacobian
  /// starts from its value at eta = 0 and is updated by Broyden steps.
  ModulationFrame decompose(const Field& u, double E0, double lambda_guess, double x_guess, double t = 0.0,
                            int max_iter = 50) const {
    if (!(lambda_guess > 0.0)) throw Error(ErrorKind::config, "bad guess", "lambda guess must be positive");
    detail::require_finite(u, "decompose");
    const double tol = 1e-10 * inner(Q_, Q_);
    double lam = lambda_guess, x = x_guess;
    Field eta;
    auto residual = [&](double l, double xx) {
      eta = rescaled_eta(u, E0, l, xx).first;
      return std::array<double, 2>{inner(eta, dQ_), inner(eta, LQ_)};
    };
    // rows: (eta, Q'), (eta, Lambda Q); columns: d/dlambda, d/dx
    double J[2][2] = {{0.0, dQ2_ / lam}, {LQ2_ / lam, 0.0}};
    std::array<double, 2> F = residual(lam, x);
    int it = 0;
    for (; std::max(std::abs(F[0]), std::abs(F[1])) > tol; ++it) {
      if (it >= max_iter)
        throw Error(ErrorKind::numerical, "outside tube",
                    "modulation Newton did not converge in " + std::to_string(max_iter) + " iterations");
      const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
      if (!(std::abs(det) > 0.0) || !std::isfinite(det))
        throw Error(ErrorKind::numerical, "outside tube", "singular modulation Jacobian");
      double dl = -(J[1][1] * F[0] - J[0][1] * F[1]) / det;
      double dx = -(-J[1][0] * F[0] + J[0][0] * F[1]) / det;
      // Trust region: at most half a width in scale and one width in position.
      const double shrink = std::min({1.0, 0.5 * lam / std::abs(dl), lam / std::abs(dx)});
      dl *= shrink;
      dx *= shrink;
      const std::array<double, 2> Fn = residual(lam + dl, x + dx);
      // Broyden: J += (dF - J d) d^T / |d|^2
      const double d2 = dl * dl + dx * dx;
      if (d2 > 0.0) {
        for (int r = 0; r < 2; ++r) {
          const double y = Fn[r] - F[r] - (J[r][0] * dl + J[r][1] * dx);
          J[r][0] += y * dl / d2;
          J[r][1] += y * dx / d2;
        }
      }
      lam += dl;
      x += dx;
      F = Fn;
      if (!std::isfinite(lam) || !std::isfinite(x))
        throw Error(ErrorKind::numerical, "outside tube", "modulation Newton diverged");
    }
    auto [eta_f, eps] = rescaled_eta(u, E0, lam, x);
    ModulationFrame fr;
    fr.t = t;
    fr.lambda = lam;
    fr.x = x;
    fr.b = -E0 * lam / p0_;
    fr.orth_Qprime = std::abs(F[0]);
    fr.orth_LambdaQ = std::abs(F[1]);
    fr.eta_h_half = std::sqrt(norm_h_half_sq(eta_f));
    if (fr.eta_h_half > 0.5 * q_h_half_)
      throw Error(ErrorKind::numerical, "outside tube",
                  "||eta||_{H^1/2} = " + std::to_string(fr.eta_h_half) + " exceeds half of ||Q||_{H^1/2}");
    fr.eps = std::move(eps);
    fr.eps_h_half_sq = norm_h_half_sq(fr.eps);
    fr.local_l2 = std::sqrt(inner(fr.eps * fr.eps, Field::from_function(g_, [](double y) { return 1.0 / (1.0 + y * y); })));
    fr.iterations = it;
    fill_functionals(fr);
    return fr;
  }

  /// N(eps) and F at s_abs = 1/lambda; left as NaN when 1/lambda <= 1.
  void fill_functionals(ModulationFrame& fr) const {
    const double s_abs = 1.0 / fr.lambda;
    if (!(s_abs > 1.0)) return;
    fr.N_eps = n_eps(fr.eps, s_abs, w_);
    fr.F_val = functional_F(fr.eps, Q_b(fr.b), s_abs, w_);
  }

  /// Assembles lambda^{-1/2} (Q_b + eps)((x' - x) / lambda) on `target` from
  /// the real-line Q and the given eps (evaluated by interpolation on the
  /// ground-state grid).
  Field assemble(const Grid& target, double lambda, double x, double b, const Field* eps = nullptr) const {
    Field w = Q_b(b);
    if (eps) w += *eps;
    const double start = (target.left() - x) / lambda, step = target.dx() / lambda;
    std::vector<double> v = interp_uniform(w, start, step, target.size());
    const double half = 0.5 * g_.length();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double y = start + step * static_cast<double>(i);
      if (std::abs(y) >= half) v[i] = 0.0;
      v[i] /= std::sqrt(lambda);
    }
    return Field(target, std::move(v));
  }

 private:
  // eta and eps for given (lambda, x).
  std::pair<Field, Field> rescaled_eta(const Field& u, double E0, double lam, double x) const {
    const Grid& G = u.grid();
    const double b = -E0 * lam / p0_;
    const Field Pb = P_b(b);
    const double dy = g_.dx(), y0 = g_.left();
    const double z_lo = G.left(), z_hi = G.left() + G.length();
    const double z_first = lam * y0 + x, z_last = lam * (y0 + dy * static_cast<double>(g_.size() - 1)) + x;
    const bool covered = z_first >= z_lo && z_last < z_hi;
    Field eps(g_);
    std::size_t j0 = 0, j1 = g_.size();
    if (!covered) {
      const double a = ((z_lo - x) / lam - y0) / dy, c = ((z_hi - x) / lam - y0) / dy;
      j0 = static_cast<std::size_t>(std::clamp(std::ceil(a), 0.0, static_cast<double>(g_.size())));
      j1 = static_cast<std::size_t>(std::clamp(std::ceil(c), 0.0, static_cast<double>(g_.size())));
    }
    if (j1 > j0) {
      const double start = lam * (y0 + dy * static_cast<double>(j0)) + x;
      std::vector<double> v = interp_uniform(u, start, lam * dy, j1 - j0);
      const double s = std::sqrt(lam), width = 0.05 * G.length();
      const Cutoff chi;
      for (std::size_t j = j0; j < j1; ++j) {
        const double qb = Q_[j] + b * Pb[j];
        double wgt = 1.0;
        if (!covered) {
          const double z = lam * g_.x(j) + x;
          wgt = chi(-2.0 + std::min(z - z_lo, z_hi - z) / width);
        }
        eps[j] = wgt * (s * v[j - j0] - qb);
      }
    }
    Field eta = eps;
    eta.axpy(b, Pb);
    return {std::move(eta), std::move(eps)};
  }

  Grid g_;
  WeightParams w_;
  Field P_;
  double p0_;
  Field Q_, dQ_, LQ_;
  double dQ2_ = 0.0, LQ2_ = 0.0, q_h_half_ = 0.0;
};

struct FCoercivityReport {
  double s_abs = 0.0;
  int trials = 0;
  double C = 0.0;         // declared constant in F >= kappa N^2 - C s^{theta-2}
  double kappa = 0.0;     // min (F + C s^{theta-2}) / N^2
  double raw_min = 0.0;   // min F / N^2
  double mean = 0.0;      // mean F / N^2
  double amplitude = 0.0; // N(eps) of every trial
};

/// Samples F / N^2 over random eps orthogonal to Q, Q' and Lambda Q, scaled to
/// N(eps) = amplitude, with Q_b taken at b = -1/s_abs (the regime b = -lambda).
/// With the default C = 0 kappa is the plain lower bound of F / N^2.
inline FCoercivityReport f_coercivity_check(const Modulator& M, double s_abs, int trials, double C = 0.0,
                                            double amplitude = 0.05, std::uint64_t seed = 20240601) {
  if (trials < 1) throw Error(ErrorKind::config, "bad trials", "f_coercivity_check needs trials >= 1");
  if (!(amplitude > 0.0)) throw Error(ErrorKind::config, "bad amplitude", "amplitude must be positive");
  const Grid& g = M.grid();
  const WeightParams& w = M.weights();
  const Field Qb = M.Q_b(-1.0 / s_abs);
  std::vector<Field> basis;
  for (const Field* b : {&M.Q(), &M.LambdaQ(), &M.dQ()}) {
    Field v = *b;
    for (const Field& u : basis) v.axpy(-inner(v, u), u);
    v *= 1.0 / norm_l2(v);
    basis.push_back(std::move(v));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center(-40.0, 20.0), width(0.5, 4.0), amp(-1.0, 1.0);
  std::uniform_int_distribution<int> count(1, 6);
  FCoercivityReport rep;
  rep.s_abs = s_abs;
  rep.trials = trials;
  rep.C = C;
  rep.amplitude = amplitude;
  rep.kappa = rep.raw_min = std::numeric_limits<double>::infinity();
  const double slack = C * std::pow(s_abs, w.theta - 2.0);
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Field f(g);
    const int m = count(rng);
    for (int j = 0; j < m; ++j) {
      const double c = center(rng), wd = width(rng), a = amp(rng);
      f += Field::from_function(g, [=](double x) { return a * std::exp(-(x - c) * (x - c) / (wd * wd)); });
    }
    for (int pass = 0; pass < 2; ++pass)
      for (const Field& u : basis) f.axpy(-inner(f, u), u);
    f *= amplitude / n_eps(f, s_abs, w);
    const double N2 = amplitude * amplitude;
    const double F = functional_F(f, Qb, s_abs, w);
    rep.raw_min = std::min(rep.raw_min, F / N2);
    rep.kappa = std::min(rep.kappa, (F + slack) / N2);
    sum += F / N2;
  }
  rep.mean = sum / trials;
  return rep;
}

struct RatesRow {
  double t = 0.0;
  double s = 0.0;  // rescaled time, s(t_0) = 0
  double lambda = 0.0, x = 0.0, b = 0.0;
  double lambda_s_over_lambda = 0.0;
  double x_s_over_lambda = 0.0;
  double b_s = 0.0;
  double defect_lambda = 0.0;  // |lambda_s / lambda + b|
  double defect_x = 0.0;       // |x_s / lambda - 1|
  double defect_b = 0.0;       // |b_s + b^2|
};

namespace detail {
// Derivative of f at t[i] from the quadratic through three neighbouring nodes.
inline double three_point_derivative(const std::vector<double>& t, const std::vector<double>& f, std::size_t i) {
  const std::size_t n = t.size();
  const std::size_t a = i == 0 ? 0 : (i + 1 == n ? n - 3 : i - 1);
  const double t0 = t[a], t1 = t[a + 1], t2 = t[a + 2], x = t[i];
  const double l0 = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
  const double l1 = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
  const double l2 = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
  return l0 * f[a] + l1 * f[a + 1] + l2 * f[a + 2];
}
}  // namespace detail

/// Finite-difference modulation rates in the rescaled time ds = dt / lambda^2.
inline std::vector<RatesRow> modulation_rates(const std::vector<ModulationFrame>& frames) {
  if (frames.size() < 5)
    throw Error(ErrorKind::config, "series too short", "modulation rates need at least 5 frames");
  const std::size_t n = frames.size();
  std::vector<double> t(n), lam(n), x(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = frames[i].t;
    lam[i] = frames[i].lambda;
    x[i] = frames[i].x;
    b[i] = frames[i].b;
    if (i > 0 && !(t[i] != t[i - 1]))
      throw Error(ErrorKind::config, "bad series", "frame times must be distinct");
  }
  std::vector<RatesRow> out(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s += 0.5 * (t[i] - t[i - 1]) * (1.0 / (lam[i] * lam[i]) + 1.0 / (lam[i - 1] * lam[i - 1]));
    RatesRow& r = out[i];
    r.t = t[i];
    r.s = s;
    r.lambda = lam[i];
    r.x = x[i];
    r.b = b[i];
    const double l2 = lam[i] * lam[i];
    r.lambda_s_over_lambda = lam[i] * detail::three_point_derivative(t, lam, i);
    r.x_s_over_lambda = lam[i] * detail::three_point_derivative(t, x, i);
    r.b_s = l2 * detail::three_point_derivative(t, b, i);
    r.defect_lambda = std::abs(r.lambda_s_over_lambda + b[i]);
    r.defect_x = std::abs(r.x_s_over_lambda - 1.0);
    r.defect_b = std::abs(r.b_s + b[i] * b[i]);
  }
  return out;
}

}  // namespace fracwave
