#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fracwave/grid.hpp"

namespace fracwave {

using FieldOp = std::function<Field(const Field&)>;

struct KrylovResult {
  Field x;
  double residual = 0.0;  // ||b - A x|| / ||b||
  int iterations = 0;
};

/// Restarted GMRES with right preconditioning, so the monitored residual is the
/// true one. Throws "ill-posed" when a window of `stall_window` iterations
/// fails to reduce the residual by `stall_factor`.
inline KrylovResult gmres(const FieldOp& A, const Field& b, const FieldOp& precond, double rtol, int restart,
                          int max_iter, int stall_window = 100, double stall_factor = 1e-2) {
  const double bnorm = norm_l2(b);
  KrylovResult out{Field(b.grid()), 0.0, 0};
  if (bnorm == 0.0) return out;
  Field& x = out.x;
  std::vector<double> history;
  int total = 0;
  while (total < max_iter) {
    Field r = b - A(x);
    double beta = norm_l2(r);
    if (beta <= rtol * bnorm) {
      out.residual = beta / bnorm;
      return out;
    }
    std::vector<Field> V;
    V.reserve(restart + 1);
    V.push_back((1.0 / beta) * r);
    std::vector<Field> Z;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(restart), sn = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(restart + 1);
    g(0) = beta;
    int j = 0;
    for (; j < restart && total < max_iter; ++j, ++total) {
      Z.push_back(precond(V[j]));
      Field w = A(Z[j]);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt, two passes
        const double h = inner(w, V[i]);
        H(i, j) += h;
        w.axpy(-h, V[i]);
      }
      for (int i = 0; i <= j; ++i) {
        const double h = inner(w, V[i]);
        H(i, j) += h;
        w.axpy(-h, V[i]);
      }
      const double hn = norm_l2(w);
      H(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double den = std::hypot(H(j, j), H(j + 1, j));
      if (den == 0.0)
        throw Error(ErrorKind::numerical, "ill-posed", "GMRES breakdown: operator annihilates the Krylov space");
      cs(j) = H(j, j) / den;
      sn(j) = H(j + 1, j) / den;
      H(j, j) = den;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      const double res = std::abs(g(j + 1)) / bnorm;
      history.push_back(res);
      const std::size_t h = history.size();
      if (h > static_cast<std::size_t>(stall_window) &&
          history[h - 1] > stall_factor * history[h - 1 - static_cast<std::size_t>(stall_window)])
        throw Error(ErrorKind::numerical, "ill-posed",
                    "GMRES stagnated at relative residual " + std::to_string(res));
      if (res <= rtol || hn == 0.0) {
        ++j;
        ++total;
        break;
      }
      V.push_back((1.0 / hn) * w);
    }
    Eigen::VectorXd y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    for (int i = 0; i < j; ++i) x.axpy(y(i), Z[i]);
    out.iterations = total;
    const double true_res = norm_l2(b - A(x)) / bnorm;
    out.residual = true_res;
    if (true_res <= rtol) return out;
  }
  throw Error(ErrorKind::numerical, "no convergence",
              "GMRES reached " + std::to_string(max_iter) + " iterations at residual " + std::to_string(out.residual));
}

/// Conjugate gradients for a symmetric positive definite operator.
inline KrylovResult conjugate_gradient(const FieldOp& A, const Field& b, double rtol, int max_iter) {
  const double bnorm = norm_l2(b);
  KrylovResult out{Field(b.grid()), 0.0, 0};
  if (bnorm == 0.0) return out;
  Field& x = out.x;
  Field r = b, p = b;
  double rr = inner(r, r);
  for (int it = 1; it <= max_iter; ++it) {
    Field Ap = A(p);
    const double pAp = inner(p, Ap);
    if (!(pAp > 0.0)) throw Error(ErrorKind::numerical, "ill-posed", "operator is not positive definite");
    const double alpha = rr / pAp;
    x.axpy(alpha, p);
    r.axpy(-alpha, Ap);
    const double rr_new = inner(r, r);
    out.iterations = it;
    out.residual = std::sqrt(rr_new) / bnorm;
    if (out.residual <= rtol) return out;
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
  }
  throw Error(ErrorKind::numerical, "no convergence", "CG did not reach tolerance");
}

struct EigenPair {
  double value = 0.0;
  Field vector;  // unit L2 norm
  double residual = 0.0;  // ||A v - value v||
};

/// Lanczos with full reorthogonalization for the k smallest eigenpairs of a
/// symmetric operator. Stops when every wanted Ritz pair has residual below
/// tol (relative to the spectral radius estimate).
inline std::vector<EigenPair> lanczos_smallest(const FieldOp& A, Field start, int k, double tol, int max_iter) {
  std::vector<Field> V;
  std::vector<double> alpha, beta;
  start *= 1.0 / norm_l2(start);
  V.push_back(start);
  double scale = 0.0;
  for (int j = 0; j < max_iter; ++j) {
    Field w = A(V[j]);
    const double a = inner(w, V[j]);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (const Field& v : V) w.axpy(-inner(w, v), v);
    const double b = norm_l2(w);
    scale = std::max(scale, std::abs(a) + b);
    const int m = static_cast<int>(alpha.size());
    if (m >= k && (m % 5 == 0 || b < 1e-14 * scale || j + 1 == max_iter)) {
      Eigen::VectorXd d(m), e(std::max(m - 1, 0));
      for (int i = 0; i < m; ++i) d(i) = alpha[i];
      for (int i = 0; i + 1 < m; ++i) e(i) = beta[i];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
      bool done = true;
      for (int i = 0; i < k; ++i)
        if (std::abs(b * es.eigenvectors()(m - 1, i)) > tol * scale) done = false;
      if (done || b < 1e-14 * scale) {
        std::vector<EigenPair> out;
        for (int i = 0; i < k; ++i) {
          Field v(start.grid());
          for (int q = 0; q < m; ++q) v.axpy(es.eigenvectors()(q, i), V[q]);
          v *= 1.0 / norm_l2(v);
          EigenPair ep{es.eigenvalues()(i), v, 0.0};
          ep.residual = norm_l2(A(v) - ep.value * v);
          out.push_back(std::move(ep));
        }
        return out;
      }
    }
    if (b == 0.0) break;
    beta.push_back(b);
    V.push_back((1.0 / b) * w);
  }
  throw Error(ErrorKind::numerical, "no convergence", "Lanczos exhausted its iteration budget");
}

}  // namespace fracwave
