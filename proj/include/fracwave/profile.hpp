#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fracwave/fit.hpp"
#include "fracwave/linop.hpp"

namespace fracwave {

/// Smooth cutoff: 0 on (-inf, -2], 1 on [-1, inf), monotone in between,
/// built from psi(t) = exp(-1/t) as chi = psi(t) / (psi(t) + psi(1 - t)), t = x + 2.
struct Cutoff {
  /// Bounds on sup |chi^{(k)}|, k = 1..4.
  static constexpr double derivative_bounds[4] = {2.05, 10.0, 120.0, 2400.0};

  static double psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
  static double dpsi(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }

  double operator()(double x) const {
    const double t = x + 2.0;
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = psi(t), b = psi(1.0 - t);
    return a / (a + b);
  }
  double derivative(double x) const {
    const double t = x + 2.0;
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double a = psi(t), b = psi(1.0 - t), da = dpsi(t), db = -dpsi(1.0 - t);
    return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
  }
};

/// P = Ptilde - S with Ptilde in L2 (orthogonal to Q') and S(y) = int_y^inf LambdaQ
/// carrying the left plateau. The two parts are kept apart so no multiplier
/// ever acts on the non-periodic plateau.
struct Profile {
  Field P_tilde;
  Field S;
  double p0 = 0.0;
  double solve_residual = 0.0;
  double orthogonality_defect = 0.0;  // |(R, Q')| / (||R|| ||Q'||)
  Field P() const { return P_tilde - S; }
};

namespace detail {
/// Right-hand taper that brings the slowly decaying right tail of P to zero
/// before the periodic seam: 1 up to L/4, 0 beyond 7L/16.
inline Field right_taper(const Grid& g) {
  const double a = 0.25 * g.length(), b = 0.4375 * g.length();
  Cutoff chi;
  return Field::from_function(g, [=](double y) { return chi(-1.0 - (y - a) / (b - a)); });
}
}  // namespace detail

/// Builds P solving (L P)' = LambdaQ with (P, Q') = 0 and P -> int Q / 2 as y -> -inf.
inline Profile build_P(const LinearizedOperator& L) {
  const GroundState& gs = L.ground_state();
  if (gs.p != 3 || gs.alpha != 1.0)
    throw Error(ErrorKind::config, "bad ground state", "the blow-up profile needs the mBO ground state");
  const Field lq = lambda_op(unfolded(gs));
  Profile pr;
  pr.S = antideriv_from_right(lq, 2.0);
  Field R = -1.0 * hilbert(lq);
  const Field q2 = pow(gs.Q, 2);
  for (std::size_t i = 0; i < R.size(); ++i) R[i] -= 3.0 * q2[i] * pr.S[i];
  const double rn = norm_l2(R);
  pr.orthogonality_defect = std::abs(inner(R, L.dQ())) / (rn * norm_l2(L.dQ()));
  if (pr.orthogonality_defect > 1e-6)
    throw Error(ErrorKind::numerical, "orthogonality defect",
                "(R, Q') relative size " + std::to_string(pr.orthogonality_defect));
  SolveReport s = L.solve(R, 1e-11);
  pr.P_tilde = std::move(s.f);
  // On the line (S, Q') = (LambdaQ, Q) = 0; on the box it is not exactly zero,
  // so the kernel component of Ptilde is chosen to make (P, Q') = 0.
  pr.P_tilde.axpy(inner(pr.S, L.dQ()) / inner(L.dQ(), L.dQ()), L.dQ());
  pr.solve_residual = s.residual;
  pr.p0 = inner(pr.P(), gs.Q);
  return pr;
}

/// Rebuilds a Profile from a stored P (e.g. a checkpoint written by the CLI).
inline Profile profile_from_field(const LinearizedOperator& L, const Field& P) {
  const GroundState& gs = L.ground_state();
  P.check_same(gs.Q);
  Profile pr;
  pr.S = antideriv_from_right(lambda_op(unfolded(gs)), 2.0);
  pr.P_tilde = P + pr.S;
  pr.p0 = inner(P, gs.Q);
  return pr;
}

/// (L P)' - LambdaQ. With S' = -LambdaQ_u, L P = L Ptilde + H LambdaQ_u - S + 3 Q^2 S,
/// and the periodic part is differentiated spectrally.
inline Field defining_residual(const LinearizedOperator& L, const Profile& pr) {
  const GroundState& gs = L.ground_state();
  const Field lq_u = lambda_op(unfolded(gs));
  Field smooth = L.apply(pr.P_tilde) + hilbert(lq_u);
  const Field q2 = pow(gs.Q, 2);
  for (std::size_t i = 0; i < smooth.size(); ++i) smooth[i] += 3.0 * q2[i] * pr.S[i];
  Field out = deriv(smooth);
  out += lq_u;
  out -= L.LambdaQ();
  return out;
}

/// chi(|b| y) times the right taper; P_b = chi_b P. b = 0 gives the taper alone.
inline Field localized_cutoff(const Grid& g, double b) {
  const double ab = std::abs(b);
  const Cutoff chi;
  Field out = detail::right_taper(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] *= chi(ab * g.x(i));
  return out;
}

/// Localized profile family at parameter b.
struct ProfileSet {
  double b = 0.0;
  double p0 = 0.0;
  Field chi_b;    // chi(|b| y) times the right taper
  Field P_b;      // chi_b P
  Field Q_b;      // Q + b P_b
  Field R_b;      // D P_b - 3 Q^2 P_b
  Field dQb_db;   // P_b + y P chi_b'
  Field Psi_b;    // direct assembly
  Field Psi_1, Psi_2, Psi_3;  // expanded assembly, Psi_b = b Psi_1 + b^2 Psi_2 + b^3 Psi_3 (+ (res Q)')
  Field Psi_leading;          // b P chi_b' + b^2 P_b / 2, the O(|b|^{3/2}) part of Psi_b
  Field psi_expanded() const {
    Field out = b * Psi_1;
    out.axpy(b * b, Psi_2);
    out.axpy(b * b * b, Psi_3);
    return out;
  }
};

inline ProfileSet build_profile_set(const LinearizedOperator& L, const Profile& pr, double b) {
  if (!(b != 0.0 && std::abs(b) <= 0.2))
    throw Error(ErrorKind::config, "bad b", "need 0 < |b| <= 0.2, got " + std::to_string(b));
  const Grid& g = L.grid();
  if (!(0.5 * g.length() > 4.0 / std::abs(b)))
    throw Error(ErrorKind::config, "domain too small",
                "L/2 must exceed 4/|b| = " + std::to_string(4.0 / std::abs(b)));
  const Field& Q = L.Q();
  const double ab = std::abs(b);
  const Cutoff chi;
  const Field taper = detail::right_taper(g);
  const Field P = pr.P();

  ProfileSet ps;
  ps.b = b;
  ps.p0 = pr.p0;
  ps.chi_b = Field(g);
  Field ychi_p(g);  // y chi_b'(y) P(y) with chi_b' = |b| chi'(|b| y)
  ps.Psi_leading = Field(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double y = g.x(i);
    ps.chi_b[i] = chi(ab * y) * taper[i];
    const double dchi = ab * chi.derivative(ab * y) * taper[i];
    ychi_p[i] = y * dchi * P[i];
    ps.Psi_leading[i] = b * P[i] * dchi + 0.5 * b * b * ps.chi_b[i] * P[i];
  }
  ps.P_b = ps.chi_b * P;
  ps.Q_b = Q + b * ps.P_b;
  const Field q2 = pow(Q, 2);
  ps.R_b = frac_deriv(ps.P_b, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) ps.R_b[i] -= 3.0 * q2[i] * ps.P_b[i];
  ps.dQb_db = ps.P_b + ychi_p;

  // direct: (D Q_b + Q_b - Q_b^3)' - b Lambda Q_b + b^2 dQ_b/db
  Field inner_term = frac_deriv(ps.Q_b, 1.0) + ps.Q_b - pow(ps.Q_b, 3);
  ps.Psi_b = deriv(inner_term);
  ps.Psi_b.axpy(-b, lambda_op(ps.Q_b));
  ps.Psi_b.axpy(b * b, ps.dQb_db);

  // expanded
  ps.Psi_1 = deriv(L.apply(ps.P_b)) - L.LambdaQ();
  ps.Psi_2 = -3.0 * deriv(Q * pow(ps.P_b, 2)) - lambda_op(ps.P_b) + ps.dQb_db;
  ps.Psi_3 = -1.0 * deriv(pow(ps.P_b, 3));
  return ps;
}

struct ScalingFit {
  std::string name;
  double exponent = 0.0;
  double target = 0.0;
  bool flagged = false;
};

struct ScalingRow {
  double b = 0.0;
  double norm_Pb_L2 = 0.0;
  double norm_Pb_H1half = 0.0;   // ||P_b||_{H^{1/2}}
  double half_deriv_Pb_sq = 0.0; // ||D^{1/2} P_b||^2
  double norm_Psib_L2 = 0.0;
  double norm_Psib_leading = 0.0;   // ||b P chi_b' + b^2 P_b / 2||
  double norm_Psib_remainder = 0.0; // ||Psi_b - leading||
  double half_deriv_Psib = 0.0;  // ||D^{1/2} Psi_b||
  double proj_Psib_Q = 0.0;      // (Psi_b, Q)
  double mass_defect = 0.0;      // ||Q_b||^2 - ||Q||^2
  double energy_plus_p0b = 0.0;  // E(Q_b) + p0 b
  double energy_ratio = 0.0;     // E(Q_b) / (-p0 b)
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  std::vector<ScalingFit> fits;
  double dPb_slope_vs_log = 0.0;  // slope of ||D^{1/2}P_b||^2 against |ln b|
  double dPb_r2 = 0.0;
  bool dPb_flagged = false;       // not linear in |ln b| (r^2 < 0.99 or slope <= 0)
  bool all_ok() const {
    if (dPb_flagged) return false;
    for (const auto& f : fits)
      if (f.flagged) return false;
    return true;
  }
  const ScalingFit* find(const std::string& name) const {
    for (const auto& f : fits)
      if (f.name == name) return &f;
    return nullptr;
  }
};

inline ScalingRow scaling_row(const LinearizedOperator& L, const ProfileSet& ps) {
  ScalingRow r;
  const double b = ps.b;
  r.b = b;
  r.norm_Pb_L2 = norm_l2(ps.P_b);
  r.half_deriv_Pb_sq = seminorm_half_sq(ps.P_b);
  r.norm_Pb_H1half = std::sqrt(norm_h_half_sq(ps.P_b));
  r.norm_Psib_L2 = norm_l2(ps.Psi_b);
  r.norm_Psib_leading = norm_l2(ps.Psi_leading);
  r.norm_Psib_remainder = norm_l2(ps.Psi_b - ps.Psi_leading);
  r.half_deriv_Psib = std::sqrt(seminorm_half_sq(ps.Psi_b));
  r.proj_Psib_Q = inner(ps.Psi_b, L.Q());
  r.mass_defect = inner(ps.Q_b, ps.Q_b) - inner(L.Q(), L.Q());
  const double e = energy(ps.Q_b);
  r.energy_plus_p0b = e + ps.p0 * b;
  r.energy_ratio = e / (-ps.p0 * b);
  return r;
}

/// Log-log exponents of the localized-profile norms over b_list; fits more
/// than 0.25 away from their targets are flagged.
inline ScalingReport scaling_audit(const LinearizedOperator& L, const Profile& pr, const std::vector<double>& b_list) {
  if (b_list.size() < 4) throw Error(ErrorKind::config, "bad b list", "scaling_audit needs at least 4 values of b");
  ScalingReport rep;
  for (double b : b_list) rep.rows.push_back(scaling_row(L, build_profile_set(L, pr, b)));
  std::vector<double> ab, pb, psi, psil, psir, psiq, mdef, dpsi_x, dpsi, en_x, en, lnb, dpb;
  for (const auto& r : rep.rows) {
    const double a = std::abs(r.b), l = std::abs(std::log(a));
    ab.push_back(a);
    pb.push_back(r.norm_Pb_L2);
    psi.push_back(r.norm_Psib_L2);
    psil.push_back(r.norm_Psib_leading);
    psir.push_back(r.norm_Psib_remainder);
    psiq.push_back(r.proj_Psib_Q);
    mdef.push_back(r.mass_defect);
    dpsi_x.push_back(a * a * std::sqrt(l));
    dpsi.push_back(r.half_deriv_Psib);
    en_x.push_back(a * a * l);
    en.push_back(r.energy_plus_p0b);
    lnb.push_back(l);
    dpb.push_back(r.half_deriv_Pb_sq);
  }
  auto add = [&rep](std::string name, const std::vector<double>& x, const std::vector<double>& y, double target) {
    const double e = fit_loglog(x, y).slope;
    rep.fits.push_back({std::move(name), e, target, !(std::abs(e - target) <= 0.25)});
  };
  add("norm_Pb_L2 vs b", ab, pb, -0.5);
  add("norm_Psib_L2 vs b", ab, psi, 1.5);
  add("norm_Psib_leading vs b", ab, psil, 1.5);
  add("norm_Psib_remainder vs b", ab, psir, 2.0);
  add("proj_Psib_Q vs b", ab, psiq, 3.0);
  add("mass_defect vs b", ab, mdef, 1.0);
  add("half_deriv_Psib vs b^2|ln b|^1/2", dpsi_x, dpsi, 1.0);
  add("energy_plus_p0b vs b^2|ln b|", en_x, en, 1.0);
  const LineFit lf = fit_line(lnb, dpb);
  rep.dPb_slope_vs_log = lf.slope;
  rep.dPb_r2 = lf.r2;
  rep.dPb_flagged = !(lf.r2 >= 0.99 && lf.slope > 0.0);
  return rep;
}

}  // namespace fracwave
