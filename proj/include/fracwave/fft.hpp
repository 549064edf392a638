#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "fracwave/grid.hpp"

namespace fracwave {

using cplx = std::complex<double>;
/// Half spectrum of a real field (n/2 + 1 coefficients, unnormalized).
using Spectrum = std::vector<cplx>;

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (kind, size) with FFTW_UNALIGNED so any buffer works.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan r2c(int n) { return get(0, n); }
  fftw_plan c2r(int n) { return get(1, n); }
  fftw_plan c2c_forward(int n) { return get(2, n); }
  fftw_plan c2c_backward(int n) { return get(3, n); }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  fftw_plan get(int kind, int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::vector<double> re(static_cast<std::size_t>(n));
    std::vector<cplx> co(static_cast<std::size_t>(n));
    auto* c = reinterpret_cast<fftw_complex*>(co.data());
    fftw_plan plan = nullptr;
    switch (kind) {
      case 0: plan = fftw_plan_dft_r2c_1d(n, re.data(), c, flags); break;
      case 1: plan = fftw_plan_dft_c2r_1d(n, c, re.data(), flags); break;
      case 2: plan = fftw_plan_dft_1d(n, c, c, FFTW_FORWARD, flags); break;
      default: plan = fftw_plan_dft_1d(n, c, c, FFTW_BACKWARD, flags); break;
    }
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

inline Spectrum forward(std::span<const double> values) {
  const int n = static_cast<int>(values.size());
  std::vector<double> in(values.begin(), values.end());
  Spectrum out(values.size() / 2 + 1);
  fftw_execute_dft_r2c(detail::PlanCache::instance().r2c(n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

inline Spectrum forward(const Field& f) { return forward(f.values()); }

/// Inverse transform including the 1/n normalization.
inline Field inverse(Spectrum spec, const Grid& g) {
  const int n = static_cast<int>(g.size());
  Field out(g);
  fftw_execute_dft_c2r(detail::PlanCache::instance().c2r(n),
                       reinterpret_cast<fftw_complex*>(spec.data()), out.data().data());
  const double s = 1.0 / static_cast<double>(n);
  for (double& a : out.data()) a *= s;
  return out;
}

/// In-place complex FFT (sign -1 forward, +1 backward, unnormalized).
inline void fft_complex(std::vector<cplx>& data, int sign) {
  const int n = static_cast<int>(data.size());
  auto& cache = detail::PlanCache::instance();
  fftw_plan plan = sign < 0 ? cache.c2c_forward(n) : cache.c2c_backward(n);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

/// Applies a real-valued even symbol m(xi) >= 0 or any cplx-valued symbol given
/// as a function of the half-spectrum index.
template <class Symbol>
Field apply_multiplier(const Field& f, Symbol&& symbol) {
  Spectrum s = forward(f);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] *= symbol(k);
  return inverse(std::move(s), f.grid());
}

}  // namespace fracwave
