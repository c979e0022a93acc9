#pragma once

// Fixed-step classical RK4 with cubic Hermite dense output and bisection
// root localization. Fixed step keeps the event story deterministic and
// reproducible; dense output lets the engine cut a step at an event time
// without re-integrating.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "limbosim/core.hpp"
#include "limbosim/detect.hpp"
#include "limbosim/model.hpp"

namespace limbosim {

struct StepConfig {
  double dt = 1e-3;
  double t_tol = 1e-9;
  int max_bisections = 60;

  void validate() const {
    if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(t_tol > 0) || !(t_tol < dt)) {
      throw std::invalid_argument("t_tol must satisfy 0 < t_tol < dt");
    }
    // Bisection halves the bracket once per iteration; the budget must cover
    // shrinking a full step down to t_tol.
    const double needed = std::ceil(std::log2(dt / t_tol));
    if (max_bisections < needed) {
      throw std::invalid_argument("max_bisections too small to reach t_tol from dt");
    }
  }
};

/// One accepted integration step with endpoint derivatives for dense output.
struct StepSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  StateVec x0;
  StateVec x1;
  StateVec f0;
  StateVec f1;  ///< empty when x1 is not finite
  std::size_t mode = 0;
};

class NonFiniteResult : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfSegment : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline StateVec rk4(const DynamicsFn& f, double t, const StateVec& x, double dt,
                    const StateVec& k1) {
  const std::size_t n = x.size();
  StateVec tmp(n), out(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const StateVec k2 = f(t + 0.5 * dt, tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const StateVec k3 = f(t + 0.5 * dt, tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  const StateVec k4 = f(t + dt, tmp);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

}  // namespace detail

/// Advance one step from t0 to exactly t1. Does not throw on a non-finite
/// result; the caller inspects x1 (f1 is left empty in that case).
inline StepSegment advance(const DynamicsFn& f, double t0, double t1, const StateVec& x,
                           std::size_t mode = 0) {
  StepSegment seg;
  seg.t0 = t0;
  seg.t1 = t1;
  seg.x0 = x;
  seg.f0 = f(t0, x);
  seg.x1 = detail::rk4(f, t0, x, t1 - t0, seg.f0);
  seg.mode = mode;
  if (is_finite(seg.x1)) seg.f1 = f(t1, seg.x1);
  return seg;
}

/// Single RK4 step; throws NonFiniteResult if the result is not finite.
inline StateVec step(const DynamicsFn& f, double t, const StateVec& x, double dt) {
  if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("step: dt must be positive");
  StateVec out = detail::rk4(f, t, x, dt, f(t, x));
  if (!is_finite(out)) {
    throw NonFiniteResult("integration step produced a non-finite state at t=" +
                          std::to_string(t + dt));
  }
  return out;
}

/// Cubic Hermite interpolation inside a segment. Exact at both endpoints.
inline StateVec interpolate(const StepSegment& seg, double t) {
  if (t < seg.t0 || t > seg.t1) {
    throw OutOfSegment("interpolation time outside [t0, t1]");
  }
  if (t == seg.t0) return seg.x0;
  if (t == seg.t1) return seg.x1;
  const double h = seg.t1 - seg.t0;
  const double s = (t - seg.t0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  const std::size_t n = seg.x0.size();
  StateVec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = h00 * seg.x0[i] + h10 * h * seg.f0[i] + h01 * seg.x1[i] + h11 * h * seg.f1[i];
  }
  return out;
}

/// Locate a directional crossing of guard - level inside a segment.
/// Returns nullopt when the endpoint values do not cross. Otherwise bisects
/// until the bracket is narrower than t_tol and returns its post side, so the
/// guard at the returned time has already crossed.
inline std::optional<double> localize(const GuardFn& guard, const StepSegment& seg,
                                      const StepConfig& cfg, Direction dir, double level = 0.0) {
  const double g0 = guard(seg.t0, seg.x0);
  const double g1 = guard(seg.t1, seg.x1);
  if (!crossed(dir, level, g0, g1)) return std::nullopt;
  double lo = seg.t0;
  double hi = seg.t1;
  for (int i = 0; i < cfg.max_bisections && hi - lo > cfg.t_tol; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;  // bracket hit floating point resolution
    const double gm = guard(mid, interpolate(seg, mid));
    const bool crossed_at_mid = dir == Direction::Falling ? gm <= level : gm >= level;
    if (crossed_at_mid) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (hi - lo > cfg.t_tol) {
    throw NoConvergence("bisection budget exhausted before reaching t_tol");
  }
  return hi;
}

}  // namespace limbosim
