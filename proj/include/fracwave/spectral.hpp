#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <optional>
#include <vector>

#include "fracwave/fft.hpp"
#include "fracwave/grid.hpp"

namespace fracwave {

namespace detail {
inline void require_finite(const Field& f, const char* where) {
  if (!f.all_finite())
    throw Error(ErrorKind::numerical, "non-finite", std::string(where) + " received NaN/Inf samples");
}
}  // namespace detail

/// Hilbert transform, symbol -i sgn(xi). Zero and Nyquist modes map to zero.
inline Field hilbert(const Field& f) {
  detail::require_finite(f, "hilbert");
  const std::size_t nyq = f.size() / 2;
  return apply_multiplier(f, [nyq](std::size_t k) -> cplx {
    return (k == 0 || k == nyq) ? cplx(0.0) : cplx(0.0, -1.0);
  });
}

/// Fractional derivative D^alpha, symbol |xi|^alpha, alpha in [0, 2].
inline Field frac_deriv(const Field& f, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 2.0))
    throw Error(ErrorKind::config, "bad order", "frac_deriv needs alpha in [0, 2], got " + std::to_string(alpha));
  detail::require_finite(f, "frac_deriv");
  if (alpha == 0.0) return f;
  const Grid& g = f.grid();
  return apply_multiplier(f, [&g, alpha](std::size_t k) -> cplx {
    return k == 0 ? 0.0 : std::pow(g.xi(k), alpha);
  });
}

/// Exact spectral derivative (Nyquist mode dropped).
inline Field deriv(const Field& f) {
  detail::require_finite(f, "deriv");
  const Grid& g = f.grid();
  const std::size_t nyq = f.size() / 2;
  return apply_multiplier(f, [&g, nyq](std::size_t k) -> cplx {
    return k == nyq ? cplx(0.0) : cplx(0.0, g.xi(k));
  });
}

/// (D^{1/2} f, D^{1/2} g) evaluated on the spectrum.
inline double dot_half(const Field& f, const Field& g) {
  f.check_same(g);
  const Spectrum a = forward(f), b = forward(g);
  const Grid& gr = f.grid();
  const std::size_t n = gr.size();
  double s = 0.0;
  for (std::size_t k = 1; k < a.size(); ++k) {
    const double w = (k == n / 2) ? 1.0 : 2.0;
    s += w * gr.xi(k) * (a[k].real() * b[k].real() + a[k].imag() * b[k].imag());
  }
  return s * gr.dx() / static_cast<double>(n);
}

/// ||D^{1/2} f||^2
inline double seminorm_half_sq(const Field& f) { return dot_half(f, f); }

/// ||f||^2_{H^{1/2}} = int f^2 + int |D^{1/2} f|^2
inline double norm_h_half_sq(const Field& f) { return inner(f, f) + seminorm_half_sq(f); }

/// L2 norm squared computed on the spectrum (Parseval).
inline double spectral_norm_sq(const Field& f) {
  const Spectrum a = forward(f);
  const std::size_t n = f.size();
  double s = std::norm(a[0]) + std::norm(a[n / 2]);
  for (std::size_t k = 1; k < n / 2; ++k) s += 2.0 * std::norm(a[k]);
  return s * f.grid().dx() / static_cast<double>(n);
}

/// 2/3-rule projection: zero every mode with |k| > n/3.
inline Field dealias(const Field& f) {
  detail::require_finite(f, "dealias");
  const std::size_t cut = f.size() / 3;
  return apply_multiplier(f, [cut](std::size_t k) -> cplx { return k > cut ? 0.0 : 1.0; });
}

inline void dealias_spectrum(Spectrum& s, std::size_t n) {
  for (std::size_t k = n / 3 + 1; k < s.size(); ++k) s[k] = 0.0;
}

/// g(y) = int_y^R f, R = L/2, plus an analytic tail int_R^inf c / t^p when
/// tail_exponent is given (c fitted on the outer right eighth). Without a tail
/// exponent the integrand must decay at both ends of the grid.
inline Field antideriv_from_right(const Field& f, std::optional<double> tail_exponent = std::nullopt) {
  detail::require_finite(f, "antideriv_from_right");
  const Grid& g = f.grid();
  const std::size_t n = g.size();
  const double fmax = norm_inf(f);
  if (!tail_exponent && fmax > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = g.x(i);
      if (std::abs(x) > 0.375 * g.length() && std::abs(f[i]) >= 1e-6 * fmax)
        throw Error(ErrorKind::numerical, "non-decaying integrand",
                    "integrand is not small on the outer eighths and no tail exponent was given");
    }
  }
  if (tail_exponent && !(*tail_exponent > 1.0))
    throw Error(ErrorKind::config, "bad tail exponent", "tail exponent must exceed 1");

  Spectrum s = forward(f);
  const double mean = s[0].real() / static_cast<double>(n);
  s[0] = 0.0;
  s[n / 2] = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) s[k] /= cplx(0.0, g.xi(k));
  const Field periodic = inverse(std::move(s), g);  // periodic antiderivative of f - mean
  const double right = 0.5 * g.length();
  const double g_right = periodic[0];  // x = +L/2 coincides with node 0
  double tail = 0.0;
  if (tail_exponent) {
    const double p = *tail_exponent;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = g.x(i);
      if (x > 0.375 * g.length()) {
        const double b = std::pow(x, -p);
        num += f[i] * b;
        den += b * b;
      }
    }
    const double c = den > 0.0 ? num / den : 0.0;
    tail = c * std::pow(right, 1.0 - p) / (p - 1.0);
  }
  Field out(g);
  for (std::size_t i = 0; i < n; ++i) out[i] = g_right - periodic[i] + mean * (right - g.x(i)) + tail;
  return out;
}

/// Trigonometric interpolant of f evaluated at arbitrary points (direct sum).
inline std::vector<double> interp(const Field& f, std::span<const double> points) {
  detail::require_finite(f, "interp");
  const Grid& g = f.grid();
  const std::size_t n = g.size();
  const Spectrum s = forward(f);
  std::vector<double> out(points.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double d = points[j] - g.left();
    const double theta = g.xi(1) * d;
    const cplx step = std::polar(1.0, theta);
    double acc = s[0].real();
    cplx w(1.0, 0.0);
    for (std::size_t k = 1; k < n / 2; ++k) {
      // reseed the rotation periodically to keep roundoff at machine level
      w = (k % 64 == 0) ? std::polar(1.0, theta * static_cast<double>(k)) : w * step;
      acc += 2.0 * (s[k] * w).real();
    }
    acc += s[n / 2].real() * std::cos(g.xi(n / 2) * d);
    out[j] = acc * inv_n;
  }
  return out;
}

/// Trigonometric interpolant of f evaluated on the uniform point set
/// start + j * step, j < count, via a chirp-z (Bluestein) transform.
/// Points outside the periodic cell use the periodic extension.
inline std::vector<double> interp_uniform(const Field& f, double start, double step, std::size_t count) {
  detail::require_finite(f, "interp_uniform");
  const Grid& g = f.grid();
  const std::size_t n = g.size();
  const long K = static_cast<long>(n / 2);
  const Spectrum s = forward(f);
  const std::size_t terms = n + 1;  // k = -K..K, Nyquist split in halves
  std::size_t m = 1;
  while (m < terms + count) m <<= 1;

  // beta = 2 pi h / L; chirp phases pi * (h/L) * q^2 reduced in long double
  const long double ratio = static_cast<long double>(step) / static_cast<long double>(g.length());
  auto chirp = [ratio](long q) -> cplx {
    const long double qq = static_cast<long double>(q) * static_cast<long double>(q);
    long double t = ratio * qq * 0.5L;  // turns
    t -= std::floor(t);
    return std::polar(1.0, static_cast<double>(2.0L * std::numbers::pi_v<long double> * t));
  };

  const double d0 = start - g.left();
  std::vector<cplx> a(m, 0.0), b(m, 0.0);
  for (std::size_t kp = 0; kp < terms; ++kp) {
    const long k = static_cast<long>(kp) - K;
    const std::size_t ak = static_cast<std::size_t>(std::labs(k));
    cplx c = k >= 0 ? s[ak] : std::conj(s[ak]);
    if (ak == static_cast<std::size_t>(K)) c = 0.5 * s[ak].real();
    // phase e^{i xi_k d0}, reduced in turns for accuracy
    long double turns = static_cast<long double>(k) * static_cast<long double>(d0) / static_cast<long double>(g.length());
    turns -= std::floor(turns);
    const cplx ph = std::polar(1.0, static_cast<double>(2.0L * std::numbers::pi_v<long double> * turns));
    a[kp] = c * ph * chirp(static_cast<long>(kp));
  }
  // b_q = conj chirp(q) for q in [-(terms-1), count-1], stored circularly
  for (std::size_t q = 0; q < count; ++q) b[q] = std::conj(chirp(static_cast<long>(q)));
  for (std::size_t q = 1; q < terms; ++q) b[m - q] = std::conj(chirp(static_cast<long>(q)));

  fft_complex(a, -1);
  fft_complex(b, -1);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_complex(a, +1);

  std::vector<double> out(count);
  const double scale = 1.0 / (static_cast<double>(m) * static_cast<double>(n));
  for (std::size_t j = 0; j < count; ++j) {
    // remove e^{-i beta K j} and apply the output chirp e^{i beta j^2/2}
    long double turns = -ratio * static_cast<long double>(K) * static_cast<long double>(j);
    turns -= std::floor(turns);
    const cplx shift = std::polar(1.0, static_cast<double>(2.0L * std::numbers::pi_v<long double> * turns));
    out[j] = (a[j] * chirp(static_cast<long>(j)) * shift).real() * scale;
  }
  return out;
}

/// Translation by a: returns f(x - a) through the Fourier shift multiplier.
inline Field translate(const Field& f, double a) {
  const Grid& g = f.grid();
  const std::size_t nyq = f.size() / 2;
  return apply_multiplier(f, [&g, a, nyq](std::size_t k) -> cplx {
    if (k == nyq) return std::cos(g.xi(k) * a);
    return std::polar(1.0, -g.xi(k) * a);
  });
}

/// Spectral resampling to a grid of the same length and different size
/// (zero padding or truncation of the spectrum).
inline Field resample(const Field& f, std::size_t new_n) {
  const Grid& g = f.grid();
  const Grid ng(g.length(), new_n);
  const Spectrum s = forward(f);
  Spectrum t(ng.spectrum_size(), 0.0);
  const std::size_t keep = std::min(s.size(), t.size());
  const double scale = static_cast<double>(new_n) / static_cast<double>(g.size());
  for (std::size_t k = 0; k < keep; ++k) t[k] = s[k] * scale;
  // a Nyquist coefficient becomes an interior mode when refining: split it
  if (new_n > g.size()) t[g.size() / 2] *= 0.5;
  if (new_n < g.size()) t[new_n / 2] = t[new_n / 2].real();
  return inverse(std::move(t), ng);
}

}  // namespace fracwave
