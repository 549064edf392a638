#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fracwave/error.hpp"

namespace fracwave {

/// Uniform periodic grid on [-L/2, L/2) standing in for the real line.
class Grid {
 public:
  Grid() = default;
  Grid(double length, std::size_t n_points) : length_(length), n_(n_points) {
    if (!(length > 0.0) || !std::isfinite(length))
      throw Error(ErrorKind::config, "bad grid", "length must be positive and finite");
    if (n_points < 16 || (n_points & (n_points - 1)) != 0)
      throw Error(ErrorKind::config, "bad grid",
                  "n_points must be a power of two >= 16, got " + std::to_string(n_points));
  }

  double length() const noexcept { return length_; }
  std::size_t size() const noexcept { return n_; }
  double dx() const noexcept { return length_ / static_cast<double>(n_); }
  double left() const noexcept { return -0.5 * length_; }
  double x(std::size_t i) const noexcept { return left() + dx() * static_cast<double>(i); }

  /// Wavenumber of the r2c half-spectrum slot k (0 <= k <= n/2).
  double xi(std::size_t k) const noexcept {
    return 2.0 * std::numbers::pi * static_cast<double>(k) / length_;
  }
  double xi_max() const noexcept { return xi(n_ / 2); }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  std::vector<double> coordinates() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = x(i);
    return out;
  }

  /// Index of the grid node closest to y (clamped to the grid).
  std::size_t index_of(double y) const {
    double s = std::round((y - left()) / dx());
    if (s < 0.0) s = 0.0;
    if (s > static_cast<double>(n_ - 1)) s = static_cast<double>(n_ - 1);
    return static_cast<std::size_t>(s);
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  double length_ = 1.0;
  std::size_t n_ = 16;
};

/// Real samples of a function on a Grid.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& g) : grid_(g), v_(g.size(), 0.0) {}
  Field(const Grid& g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != grid_.size())
      throw Error(ErrorKind::config, "grid mismatch", "value count does not match grid size");
  }

  template <class F>
  static Field from_function(const Grid& g, F&& f) {
    Field out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out.v_[i] = f(g.x(i));
    return out;
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return v_.size(); }
  double& operator[](std::size_t i) noexcept { return v_[i]; }
  double operator[](std::size_t i) const noexcept { return v_[i]; }
  std::span<double> values() noexcept { return v_; }
  std::span<const double> values() const noexcept { return v_; }
  std::vector<double>& data() noexcept { return v_; }
  const std::vector<double>& data() const noexcept { return v_; }

  bool all_finite() const noexcept {
    for (double a : v_)
      if (!std::isfinite(a)) return false;
    return true;
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Field& operator*=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] *= o.v_[i];
    return *this;
  }
  Field& operator*=(double s) noexcept {
    for (double& a : v_) a *= s;
    return *this;
  }
  Field& operator+=(double s) noexcept {
    for (double& a : v_) a += s;
    return *this;
  }
  /// this += s * o
  Field& axpy(double s, const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += s * o.v_[i];
    return *this;
  }

  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_))
      throw Error(ErrorKind::config, "grid mismatch", "fields live on different grids");
  }

 private:
  Grid grid_;
  std::vector<double> v_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(Field a, const Field& b) { return a *= b; }
inline Field operator*(double s, Field a) { return a *= s; }
inline Field operator*(Field a, double s) { return a *= s; }
inline Field operator-(Field a) { return a *= -1.0; }

template <class F>
Field map(const Field& f, F&& op) {
  Field out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = op(f[i]);
  return out;
}

/// Pointwise f(x_i) * g(x_i) with the node coordinate available to op.
template <class F>
Field map_x(const Field& f, F&& op) {
  Field out(f.grid());
  const Grid& g = f.grid();
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = op(g.x(i), f[i]);
  return out;
}

inline Field pow(const Field& f, int p) {
  return map(f, [p](double a) {
    double r = 1.0;
    for (int k = 0; k < p; ++k) r *= a;
    return r;
  });
}

/// Rectangle-rule integral, spectrally accurate for smooth periodic integrands.
inline double integral(const Field& f) {
  double s = 0.0;
  for (double a : f.values()) s += a;
  return s * f.grid().dx();
}

inline double inner(const Field& f, const Field& g) {
  f.check_same(g);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid().dx();
}

inline double norm_l2(const Field& f) { return std::sqrt(inner(f, f)); }

inline double norm_inf(const Field& f) {
  double m = 0.0;
  for (double a : f.values()) m = std::max(m, std::abs(a));
  return m;
}

/// L2 norm restricted to |x| < fraction * L / 2.
inline double norm_l2_inner(const Field& f, double fraction = 0.5) {
  const Grid& g = f.grid();
  const double r = fraction * 0.5 * g.length();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (std::abs(g.x(i)) < r) s += f[i] * f[i];
  return std::sqrt(s * g.dx());
}

/// Reflection x -> -x on the periodic grid (node i maps to n - i).
inline Field reflect(const Field& f) {
  Field out(f.grid());
  const std::size_t n = f.size();
  out[0] = f[0];
  for (std::size_t i = 1; i < n; ++i) out[i] = f[n - i];
  return out;
}

}  // namespace fracwave
