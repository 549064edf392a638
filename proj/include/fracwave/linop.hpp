#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "fracwave/groundstate.hpp"
#include "fracwave/krylov.hpp"

namespace fracwave {

/// Eigenvalues with |mu| below this are classified as kernel.
inline constexpr double kernel_threshold = 1e-6;

/// Lambda f = f/2 + x f'.
inline Field lambda_op(const Field& f) {
  Field d = deriv(f);
  const Grid& g = f.grid();
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = 0.5 * f[i] + g.x(i) * d[i];
  return d;
}

struct SolveReport {
  Field f;
  double residual = 0.0;            // ||L f - h|| / ||h|| after projection
  double projection_defect = 0.0;   // |(h, Q')| / (||h|| ||Q'||) before projection
  int iterations = 0;
};

struct CoercivityReport {
  int trials = 0;
  double min_ratio = 0.0;
  double mean_ratio = 0.0;
};

/// L = D + 1 - 3 Q^2 around a ground state Q.
class LinearizedOperator {
 public:
  explicit LinearizedOperator(const GroundState& gs)
      : gs_(&gs), potential_(3.0 * pow(gs.Q, 2)), dq_(deriv(gs.Q)), lq_(lambda_op(gs.Q)) {
    dq_unit_ = (1.0 / norm_l2(dq_)) * dq_;
  }

  const GroundState& ground_state() const { return *gs_; }
  const Grid& grid() const { return gs_->grid(); }
  const Field& Q() const { return gs_->Q; }
  const Field& dQ() const { return dq_; }
  const Field& LambdaQ() const { return lq_; }

  Field apply(const Field& f) const {
    Field out = frac_deriv(f, 1.0);
    out += f;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= potential_[i] * f[i];
    return out;
  }

  /// (L f, f) in the quadratic form D + 1 - 3Q^2.
  double quadratic_form(const Field& f) const {
    double v = seminorm_half_sq(f) + inner(f, f);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += potential_[i] * f[i] * f[i];
    return v - s * f.grid().dx();
  }

  Field project_off_kernel(const Field& f) const {
    Field out = f;
    out.axpy(-inner(f, dq_unit_), dq_unit_);
    return out;
  }

  /// Solves L f = h with (f, Q') = 0 by right-preconditioned GMRES on the
  /// complement of Q'. h is projected first; the removed fraction is reported.
  SolveReport solve(const Field& h, double rtol = 1e-10, int max_iter = 2000) const {
    SolveReport rep;
    const double hn = norm_l2(h);
    if (hn == 0.0) {
      rep.f = Field(h.grid());
      return rep;
    }
    rep.projection_defect = std::abs(inner(h, dq_unit_)) / hn;
    const Field hp = project_off_kernel(h);
    const Grid& g = grid();
    auto A = [this](const Field& f) { return project_off_kernel(apply(project_off_kernel(f))); };
    auto M = [this, &g](const Field& f) {
      return project_off_kernel(apply_multiplier(f, [&g](std::size_t k) -> cplx { return 1.0 / (1.0 + g.xi(k)); }));
    };
    KrylovResult kr = gmres(A, hp, M, rtol, 200, max_iter);
    rep.f = project_off_kernel(kr.x);
    rep.iterations = kr.iterations;
    rep.residual = norm_l2(apply(rep.f) - hp) / norm_l2(hp);
    return rep;
  }

  /// The k lowest eigenpairs. Lanczos runs on a spectrally truncated grid
  /// (spacing 1/8, at least 2^12 points); each pair is then refined on the full
  /// grid by inverse iteration, deflating the pairs already refined and
  /// shifting just below the coarse eigenvalue so every solve is SPD.
  /// Pairs in the continuum (eigenvalue near 1) converge slowly and are
  /// returned with their measured residual after a capped number of sweeps.
  std::vector<EigenPair> spectrum_bottom(int k, double tol = 1e-10) const {
    if (k < 1 || k > 10) throw Error(ErrorKind::config, "bad k", "spectrum_bottom needs 1 <= k <= 10");
    const Grid& g = grid();
    std::size_t nc = 1u << 12;
    while (nc < g.size() && g.length() / static_cast<double>(nc) > 0.125) nc <<= 1;
    nc = std::min(nc, g.size());
    const Field pc = nc == g.size() ? potential_ : resample(potential_, nc);
    auto Ac = [&pc](const Field& f) {
      Field out = frac_deriv(f, 1.0);
      out += f;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pc[i] * f[i];
      return out;
    };
    Field seed = Field::from_function(pc.grid(), [](double x) { return std::exp(-x * x / 8.0) * (1.0 + 0.5 * x); });
    auto coarse = lanczos_smallest(Ac, seed, k, 1e-7, 3000);

    std::vector<EigenPair> out;
    std::vector<double> mu_c;
    for (const auto& ep : coarse) mu_c.push_back(ep.value);
    for (int i = 0; i < k; ++i) {
      Field v = nc == g.size() ? coarse[i].vector : resample(coarse[i].vector, g.size());
      const double gap = i == 0 ? 0.5 : 0.5 * (mu_c[i] - mu_c[i - 1]);
      const double shift = mu_c[i] - std::max(gap, 1e-3);
      const bool continuum = mu_c[i] > 0.9;
      out.push_back(refine_pair(std::move(v), shift, out, tol, continuum ? 10 : 100));
    }
    return out;
  }

  /// Lowest eigenpair by shifted inverse iteration (shift below the spectrum).
  EigenPair ground_eigenpair(double shift, double tol = 1e-10) const {
    Field v = Q();
    return refine_pair(std::move(v), shift, {}, tol, 200);
  }

  /// Min over random f, orthogonal to Q, Lambda Q, Q', of (L f, f) / ||f||^2_{H^{1/2}}.
  CoercivityReport coercivity_check(int trials, std::uint64_t seed = 20240601) const {
    if (trials < 1) throw Error(ErrorKind::config, "bad trials", "coercivity_check needs trials >= 1");
    std::vector<Field> basis;
    for (const Field* b : {&gs_->Q, &lq_, &dq_}) {
      Field v = *b;
      for (const Field& u : basis) v.axpy(-inner(v, u), u);
      v *= 1.0 / norm_l2(v);
      basis.push_back(std::move(v));
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> center(-15.0, 15.0), width(0.3, 4.0), amp(-1.0, 1.0);
    std::uniform_int_distribution<int> count(1, 6);
    CoercivityReport rep;
    rep.trials = trials;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    const Grid& g = grid();
    for (int t = 0; t < trials; ++t) {
      Field f(g);
      const int m = count(rng);
      for (int j = 0; j < m; ++j) {
        const double c = center(rng), w = width(rng), a = amp(rng);
        f += Field::from_function(g, [=](double x) { return a * std::exp(-(x - c) * (x - c) / (w * w)); });
      }
      for (int pass = 0; pass < 2; ++pass)
        for (const Field& u : basis) f.axpy(-inner(f, u), u);
      const double r = quadratic_form(f) / norm_h_half_sq(f);
      rep.min_ratio = std::min(rep.min_ratio, r);
      sum += r;
    }
    rep.mean_ratio = sum / trials;
    return rep;
  }

 private:
  EigenPair refine_pair(Field v, double shift, const std::vector<EigenPair>& deflate, double tol,
                        int max_sweeps) const {
    auto project = [&deflate](Field f) {
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& ep : deflate) f.axpy(-inner(f, ep.vector), ep.vector);
      return f;
    };
    auto A = [this, shift, &project](const Field& f) {
      Field p = project(f);
      Field out = apply(p);
      out.axpy(-shift, p);
      return project(out);
    };
    v = project(std::move(v));
    v *= 1.0 / norm_l2(v);
    double mu = inner(apply(v), v);
    double res = norm_l2(project(apply(v)) - mu * v);
    for (int sweep = 0; sweep < max_sweeps && res > tol * std::max(1.0, std::abs(mu)); ++sweep) {
      v = project(conjugate_gradient(A, v, 1e-13, 5000).x);
      v *= 1.0 / norm_l2(v);
      mu = inner(apply(v), v);
      res = norm_l2(project(apply(v)) - mu * v);
    }
    orient(v);
    return EigenPair{mu, std::move(v), res};
  }

  // sign convention: largest-magnitude sample positive
  static void orient(Field& v) {
    std::size_t im = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[im])) im = i;
    if (v[im] < 0.0) v *= -1.0;
  }

  const GroundState* gs_;
  Field potential_;
  Field dq_, dq_unit_, lq_;
};

}  // namespace fracwave
