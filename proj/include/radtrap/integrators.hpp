#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "radtrap/errors.hpp"

namespace radtrap {

struct StepControl
{
  double rtol = 1e-8;
  double atol = 1e-10;
  double min_step = 1e-14;
  long max_steps = 200'000'000;
};

struct IntegrationStats
{
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  /// Sum over accepted steps of the largest absolute local error estimate.
  double error_sum = 0.0;
};

namespace detail {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

template <int N>
Vec<N> error_scale(const Vec<N>& y0, const Vec<N>& y1, const StepControl& c)
{
  return (c.atol + c.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
}

inline void check_step(double h, double t, const StepControl& c)
{
  if (h < c.min_step) {
    throw StepSizeUnderflow("step size " + std::to_string(h) + " below minimum at t=" +
                            std::to_string(t));
  }
}

// A trial stage landed in an inverted state: reject and retry with a quarter
// of the step. Rethrows once the step can no longer shrink, since the
// accepted state itself is then inverted.
inline void shrink_after_inversion(double& h, double t, const StepControl& c,
                                   IntegrationStats& stats)
{
  ++stats.rejected;
  h *= 0.25;
  if (h < c.min_step)
    throw InversionError("population inversion reached at t=" + std::to_string(t));
}

// Emits every output time in (t, t + h] through `interpolate(theta)`.
template <typename Interp, typename Observer>
void emit(std::span<const double> outputs, std::size_t& next, double t, double h,
          Interp&& interpolate, Observer&& observe)
{
  const double t_new = t + h;
  while (next < outputs.size() && outputs[next] <= t_new * (1 + 1e-14) + 1e-300) {
    const double theta = std::clamp((outputs[next] - t) / h, 0.0, 1.0);
    observe(outputs[next], interpolate(theta));
    ++next;
  }
}

}  // namespace detail

/// Dormand-Prince 5(4) with Hairer's PI step control and fourth-order dense
/// output. `rhs(y)` is autonomous; `observe(t, y)` is called at every time in
/// `outputs` (sorted, within [t0, t_end]).
template <int N, typename Rhs, typename Observer>
IntegrationStats integrate_dopri5(Rhs&& rhs, detail::Vec<N> y, double t0, double t_end,
                                  std::span<const double> outputs, Observer&& observe,
                                  const StepControl& ctrl = {})
{
  using V = detail::Vec<N>;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                   d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                   d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
  constexpr double beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;

  IntegrationStats stats;
  std::size_t next = 0;
  while (next < outputs.size() && outputs[next] <= t0) {
    observe(outputs[next], y);
    ++next;
  }

  const int n = static_cast<int>(y.size());
  auto norm = [n](const V& v) { return std::sqrt(v.squaredNorm() / n); };

  V k1 = rhs(y);
  ++stats.rhs_evaluations;

  // Initial step guess after Hairer & Wanner.
  double h;
  {
    const V sk = detail::error_scale<N>(y, y, ctrl);
    const double dnf = norm(k1.cwiseQuotient(sk));
    const double dny = norm(y.cwiseQuotient(sk));
    double h0 = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h0 = std::min(h0, t_end - t0);
    const V k2 = rhs(V(y + h0 * k1));
    ++stats.rhs_evaluations;
    const double der2 = norm((k2 - k1).cwiseQuotient(sk)) / h0;
    const double der12 = std::max(der2, dnf);
    const double h1 =
        der12 <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / der12, 0.2);
    h = std::min({100 * h0, h1, t_end - t0});
  }

  double t = t0;
  double facold = 1e-4;
  bool last = false;
  V k2, k3, k4, k5, k6, k7, y1;
  while (!last) {
    if (stats.accepted + stats.rejected >= ctrl.max_steps)
      throw NoConvergence("integrator exceeded the maximum number of steps");
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }

    try {
      k2 = rhs(V(y + h * a21 * k1));
      k3 = rhs(V(y + h * (a31 * k1 + a32 * k2)));
      k4 = rhs(V(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
      k5 = rhs(V(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
      k6 = rhs(V(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
      y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      k7 = rhs(y1);
      stats.rhs_evaluations += 6;
    } catch (const InversionError&) {
      detail::shrink_after_inversion(h, t, ctrl, stats);
      last = false;
      continue;
    }

    const V err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err_norm = norm(err.cwiseQuotient(detail::error_scale<N>(y, y1, ctrl)));
    const double fac11 = std::pow(err_norm, expo1);

    if (err_norm <= 1.0) {
      ++stats.accepted;
      stats.error_sum += err.cwiseAbs().maxCoeff();

      const V ydiff = y1 - y;
      const V bspl = h * k1 - ydiff;
      const V r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      const V r4 = ydiff - h * k7 - bspl;
      auto interpolate = [&](double s) -> V {
        const double s1 = 1.0 - s;
        return y + s * (ydiff + s1 * (bspl + s * (r4 + s1 * r5)));
      };
      detail::emit(outputs, next, t, h, interpolate, observe);

      double fac = fac11 / std::pow(facold, beta);
      fac = std::clamp(fac / 0.9, 0.1, 5.0);
      facold = std::max(err_norm, 1e-4);
      t += h;
      y = y1;
      k1 = k7;
      h /= fac;
    } else {
      ++stats.rejected;
      last = false;
      h /= std::min(5.0, fac11 / 0.9);
    }
    if (!last)
      detail::check_step(h, t, ctrl);
  }
  while (next < outputs.size()) {
    observe(outputs[next], y);
    ++next;
  }
  return stats;
}

/// L-stable second-order Rosenbrock method with a third-order error estimate
/// (the modified Rosenbrock pair of Shampine & Reichelt). The Jacobian is
/// formed by forward differences at every step. Meant for long runs toward
/// stationary states, where the explicit method is stability-bound.
template <int N, typename Rhs, typename Observer>
IntegrationStats integrate_rosenbrock23(Rhs&& rhs, detail::Vec<N> y, double t0, double t_end,
                                        std::span<const double> outputs, Observer&& observe,
                                        const StepControl& ctrl = {})
{
  using V = detail::Vec<N>;
  using M = Eigen::Matrix<double, N, N>;
  const double d = 1.0 / (2.0 + std::sqrt(2.0));
  const double e32 = 6.0 + std::sqrt(2.0);

  IntegrationStats stats;
  std::size_t next = 0;
  while (next < outputs.size() && outputs[next] <= t0) {
    observe(outputs[next], y);
    ++next;
  }

  const int n = static_cast<int>(y.size());
  double t = t0;
  V f0 = rhs(y);
  ++stats.rhs_evaluations;
  double h = std::min(t_end - t0, 1e-3 / std::max(1.0, f0.cwiseAbs().maxCoeff()));
  bool last = false;

  while (!last) {
    if (stats.accepted + stats.rejected >= ctrl.max_steps)
      throw NoConvergence("integrator exceeded the maximum number of steps");
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }

    M jac(n, n);
    for (int j = 0; j < n; ++j) {
      const double delta = std::sqrt(1e-16) * std::max(1e-8, std::abs(y[j]));
      V yp = y;
      yp[j] += delta;
      jac.col(j) = (rhs(yp) - f0) / (yp[j] - y[j]);
    }
    stats.rhs_evaluations += n;

    const Eigen::PartialPivLU<M> w(M(M::Identity(n, n) - h * d * jac));
    const V k1 = w.solve(f0);
    V f1, k2, y1, f2;
    try {
      f1 = rhs(V(y + 0.5 * h * k1));
      k2 = V(w.solve(V(f1 - k1))) + k1;
      y1 = y + h * k2;
      f2 = rhs(y1);
      stats.rhs_evaluations += 2;
    } catch (const InversionError&) {
      detail::shrink_after_inversion(h, t, ctrl, stats);
      last = false;
      continue;
    }
    const V k3 = w.solve(V(f2 - e32 * (k2 - f1) - 2.0 * (k1 - f0)));

    const V err = (h / 6.0) * (k1 - 2.0 * k2 + k3);
    const double err_norm =
        err.cwiseQuotient(detail::error_scale<N>(y, y1, ctrl)).cwiseAbs().maxCoeff();

    if (err_norm <= 1.0) {
      ++stats.accepted;
      stats.error_sum += err.cwiseAbs().maxCoeff();
      auto interpolate = [&](double s) -> V {
        return y + h * (s * (1 - s) / (1 - 2 * d) * k1 + s * (s - 2 * d) / (1 - 2 * d) * k2);
      };
      detail::emit(outputs, next, t, h, interpolate, observe);
      t += h;
      y = y1;
      f0 = f2;
      h *= std::min(5.0, 0.8 * std::pow(std::max(err_norm, 1e-12), -1.0 / 3.0));
    } else {
      ++stats.rejected;
      last = false;
      h *= std::max(0.1, 0.8 * std::pow(err_norm, -1.0 / 3.0));
    }
    if (!last)
      detail::check_step(h, t, ctrl);
  }
  while (next < outputs.size()) {
    observe(outputs[next], y);
    ++next;
  }
  return stats;
}

}  // namespace radtrap
