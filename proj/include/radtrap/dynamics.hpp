#pragma once

#include <span>
#include <vector>

#include "radtrap/integrators.hpp"
#include "radtrap/model.hpp"

namespace radtrap {

enum class Integrator {
  DormandPrince,  // explicit 5(4), the default
  Rosenbrock,     // L-stable 2(3), for long runs into stationarity
};

struct EvolveOptions
{
  double rtol = 1e-8;
  double atol = 1e-10;
  Integrator integrator = Integrator::DormandPrince;
};

/// Populations and collective rate sampled on the output grid. `pump_rates`
/// holds -d/dt ln(rho_aa + rho_cc) on the same grid (empty if fewer than three
/// samples); NaN from the first sample where rho_aa + rho_cc drops below
/// 100 atol, where it is integration noise.
struct Trajectory
{
  std::vector<double> times;
  std::vector<PopulationState> states;
  std::vector<double> gammas;
  std::vector<double> pump_rates;
  IntegrationStats stats;
  /// Largest |trace - 1| over the output samples.
  double max_trace_error = 0.0;
  /// The integrator visited a state with rho_aa > rho_bb.
  bool inversion_seen = false;
};

/// Integrates the rate equations with the collective rate re-evaluated from
/// the current populations at every stage. `output_grid` must be sorted and
/// lie in [0, t_end].
Trajectory evolve(const SystemParams& params, const PopulationState& initial, double t_end,
                  std::span<const double> output_grid, const EvolveOptions& options = {});

/// n equally spaced samples on [t0, t1], both ends included.
std::vector<double> uniform_grid(double t0, double t1, int n);

/// Initial state with the pumped and target states equally populated.
inline PopulationState equal_lower_populations()
{
  return {0.0, 0.5, 0.5};
}

/// Closed-form estimate of the late-time pump rate for `params` (gamma/2 in a
/// thin medium).
double pump_rate_estimate(const SystemParams& params);

/// Default integration window, 15 / pump_rate_estimate, capped at 1e7 / gamma.
/// Longer windows push rho_aa + rho_cc below the absolute tolerance.
double default_t_end(const SystemParams& params);

/// -d/dt ln(rho_aa + rho_cc) by three-point differences (second order,
/// one-sided at the ends). Throws DegenerateGrid for fewer than three samples.
std::vector<double> effective_pump_rate(std::span<const double> times,
                                        std::span<const double> pumped);
std::vector<double> effective_pump_rate(const Trajectory& traj);

/// gamma / (2 K sqrt(pi ln K)); DomainError for K <= 1.
double asymptotic_pump_rate_inhom(double k);

/// (gamma / 2) exp(-K_tilde).
double asymptotic_pump_rate_rad(double k_tilde);

struct Plateau
{
  double rate = 0.0;
  /// (max - min) / median over the final 20% window.
  double spread = 0.0;
};

/// Median of the effective pump rate over the final 20% of the time window.
/// Throws NotConverged if the pumped population has not dropped below 10% of
/// its initial value or the relative spread exceeds 10%.
Plateau estimate_asymptote(const Trajectory& traj);

}  // namespace radtrap
