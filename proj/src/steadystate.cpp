#include "radtrap/steadystate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "radtrap/dynamics.hpp"
#include "radtrap/parallel.hpp"
#include "radtrap/trapping.hpp"

namespace radtrap {

namespace {

PopulationState expand(const Eigen::Vector2d& v)
{
  return {v[0], 1.0 - v[0] - v[1], v[1]};
}

// Keeps (rho_aa, rho_cc) inside the population simplex and, for the radiative
// regime, out of inversion.
Eigen::Vector2d project(Eigen::Vector2d v, bool radiative)
{
  v = v.cwiseMax(0.0);
  const double total = v.sum();
  if (total > 1.0)
    v /= total;
  if (radiative && 2.0 * v[0] + v[1] > 1.0)
    v[0] = 0.5 * (1.0 - v[1]);
  return v;
}

struct Evaluation
{
  Eigen::Vector2d f;  // (d rho_aa/dt, d rho_cc/dt)
  double gamma = 0.0;
  double residual = 0.0;
};

Evaluation evaluate(const Eigen::Vector2d& v, const SystemParams& p)
{
  const PopulationState s = expand(v);
  Evaluation e;
  e.gamma = collective_rate(s, p);
  const Vector3<double> d = rate_rhs(s, p, e.gamma);
  e.f = {d[0], d[2]};
  e.residual = d.cwiseAbs().maxCoeff();
  return e;
}

Eigen::Matrix2d jacobian(const Eigen::Vector2d& v, const Evaluation& at, const SystemParams& p)
{
  const double g = at.gamma;
  const double a = v[0];
  const double b = 1.0 - v[0] - v[1];

  // Partial derivatives at fixed Gamma.
  Eigen::Matrix2d jac;
  jac << -(p.gamma + p.gamma_prime + 2.0 * g + p.pump_rate), p.pump_rate - g,
      p.gamma_prime - p.gamma0 + p.pump_rate, -2.0 * p.gamma0 - p.pump_rate;

  // Gamma(rho) has no convenient closed-form gradient in the self-consistent
  // case; forward differences into the interior.
  Eigen::RowVector2d grad;
  for (int j = 0; j < 2; ++j) {
    const double h = 1e-7 * std::max(std::abs(v[j]), 1e-3);
    const double first = (v.sum() + h <= 1.0) ? h : -h;
    for (double sign : {1.0, -1.0}) {
      Eigen::Vector2d shifted = v;
      shifted[j] += sign * first;
      try {
        grad[j] = (collective_rate(expand(shifted), p) - g) / (shifted[j] - v[j]);
        break;
      } catch (const InversionError&) {
        if (sign < 0.0)
          throw;
      }
    }
  }
  jac.row(0) += (b - a) * grad;
  return jac;
}

struct NewtonOutcome
{
  Eigen::Vector2d v;
  Evaluation eval;
  int steps = 0;
  bool converged = false;
};

NewtonOutcome damped_newton(Eigen::Vector2d v, const SystemParams& p, const StationaryOptions& o)
{
  const bool radiative = is_radiative(p.regime);
  NewtonOutcome out;
  v = project(v, radiative);
  Evaluation eval = evaluate(v, p);

  for (int step = 0; step < o.max_newton_steps; ++step) {
    out.steps = step;
    if (eval.residual < o.tolerance) {
      out.converged = true;
      break;
    }
    Eigen::Vector2d delta;
    try {
      delta = jacobian(v, eval, p).partialPivLu().solve(-eval.f);
    } catch (const InversionError&) {
      break;
    }
    if (!delta.allFinite())
      break;

    const double norm0 = eval.f.norm();
    bool accepted = false;
    for (double lambda = 1.0; lambda > 1e-12; lambda *= 0.5) {
      const Eigen::Vector2d trial = project(v + lambda * delta, radiative);
      try {
        const Evaluation te = evaluate(trial, p);
        if (te.f.norm() < (1.0 - 1e-4 * lambda) * norm0 || te.residual < o.tolerance) {
          v = trial;
          eval = te;
          accepted = true;
          break;
        }
      } catch (const InversionError&) {
        // shrink the step
      }
    }
    if (!accepted)
      break;
  }
  out.converged = out.converged || eval.residual < o.tolerance;
  out.v = v;
  out.eval = eval;
  return out;
}

// Below this relaxation rate the drift is smaller than the rounding noise of
// the rate equations and no double-precision integration can follow it.
constexpr double kResolvableRate = 1e-9;

double slowest_rate(const SystemParams& p)
{
  return std::max(p.gamma0, pump_rate_estimate(p));
}

}  // namespace

double stationary_residual(const PopulationState& s, const SystemParams& p)
{
  return rate_rhs(s, p, collective_rate(s, p)).cwiseAbs().maxCoeff();
}

PopulationState thin_stationary(const SystemParams& p)
{
  // rate_rhs with Gamma = 0 is affine in (rho_aa, rho_cc).
  Eigen::Matrix2d a;
  a << -(p.gamma + p.gamma_prime + p.pump_rate), p.pump_rate,
      p.gamma_prime - p.gamma0 + p.pump_rate, -2.0 * p.gamma0 - p.pump_rate;
  const Eigen::Vector2d rhs(0.0, -p.gamma0);
  return expand(a.partialPivLu().solve(rhs));
}

StationaryResult stationary(const SystemParams& p, const StationaryOptions& o)
{
  validate(p);
  const PopulationState guess = o.initial_guess.value_or(thin_stationary(p));

  NewtonOutcome best = damped_newton(Eigen::Vector2d(guess.aa(), guess.cc()), p, o);
  int restarts = 0;
  std::mt19937_64 rng(o.restart_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (!best.converged && restarts < o.restarts) {
    ++restarts;
    // Uniform point on the simplex.
    double u = unit(rng), w = unit(rng);
    if (u + w > 1.0) {
      u = 1.0 - u;
      w = 1.0 - w;
    }
    const NewtonOutcome trial = damped_newton(Eigen::Vector2d(u, w), p, o);
    if (trial.converged || trial.eval.residual < best.eval.residual)
      best = trial;
  }
  if (!best.converged) {
    throw NoConvergence("stationary Newton solve failed after " + std::to_string(restarts) +
                        " restarts; best residual " + std::to_string(best.eval.residual));
  }

  StationaryResult result;
  result.state = expand(best.v);
  result.newton_state = result.state;
  result.gamma = best.eval.gamma;
  result.residual = best.eval.residual;
  result.newton_steps = best.steps;
  result.restarts_used = restarts;
  result.discrepancy = std::numeric_limits<double>::quiet_NaN();

  if (o.cross_validate && slowest_rate(p) >= kResolvableRate * p.gamma) {
    result.cross_validated = true;
    const double horizon = 1e3 / slowest_rate(p);
    const std::vector<double> grid{horizon};
    EvolveOptions eo;
    eo.integrator = Integrator::Rosenbrock;
    eo.rtol = 1e-10;
    eo.atol = 1e-14;
    const Trajectory traj = evolve(p, equal_lower_populations(), horizon, grid, eo);
    const PopulationState& integrated = traj.states.back();
    result.discrepancy = (integrated.vector() - result.state.vector()).cwiseAbs().maxCoeff();
    if (!(result.discrepancy <= o.agreement)) {
      throw NoConvergence("Newton and long-time integration disagree by " +
                          std::to_string(result.discrepancy));
    }
    const double residual = stationary_residual(integrated, p);
    if (residual < o.tolerance && residual <= result.residual) {
      result.state = integrated;
      result.gamma = traj.gammas.back();
      result.residual = residual;
    }
  }
  return result;
}

SweepTable sweep(const SystemParams& base, std::span<const double> densities,
                 std::span<const double> gamma0_list, const SweepOptions& options)
{
  if (densities.empty() || gamma0_list.empty())
    throw InvalidArgument("sweep grids must be non-empty");
  for (double k : densities) {
    if (!(k >= 0.0))
      throw InvalidArgument("density parameters must be >= 0");
  }

  SweepTable table;
  table.radiative = is_radiative(base.regime);
  table.rows.resize(densities.size() * gamma0_list.size());

  auto run_series = [&](std::size_t series) {
    std::optional<PopulationState> seed;
    for (std::size_t i = 0; i < densities.size(); ++i) {
      SweepRow& row = table.rows[series * densities.size() + i];
      row.density = densities[i];
      row.gamma0 = gamma0_list[series];
      SystemParams p = with_density(base, row.density);
      p.gamma0 = row.gamma0;
      StationaryOptions so = options.stationary;
      if (seed)
        so.initial_guess = seed;
      try {
        row.result = stationary(p, so);
        seed = row.result->newton_state;
      } catch (const Error& e) {
        row.error = e.what();
      }
    }
  };

  parallel_for(gamma0_list.size(), worker_threads(options.threads, gamma0_list.size()),
               run_series);
  return table;
}

}  // namespace radtrap
