#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "radtrap/model.hpp"

namespace radtrap {

/// Broad-band pump and coherence settings for the stochastic Bloch ensemble.
/// Rates are in units of gamma, times in units of 1/gamma.
struct StochasticConfig
{
  double bandwidth = 200.0;  // B, correlation rate of the pump process
  double pump_rate = 10.0;   // R = integral of <Omega*(t) Omega(t + tau)> d tau
  long n_trajectories = 10'000;
  double dt = 5e-4;
  std::uint64_t seed = 1;
  double delta_ac = 0.0;
  /// Coherence decay; (gamma + gamma' + Gamma) / 2 + gamma0 / 2 when empty.
  std::optional<double> gamma_ac;
  /// Collective rate held fixed during the run.
  double collective_rate = 0.0;
  /// Trajectories whose noise is kept for the autocorrelation estimate.
  int noise_trajectories = 256;
  /// Worker threads; 0 = RADTRAP_THREADS or hardware.
  unsigned threads = 0;
};

/// Rejects configurations outside B >= 10 max(gamma, gamma', R, Gamma),
/// dt <= 0.1 / B, n_trajectories >= 100. The pump rate in `cfg` must match
/// `params.pump_rate`.
void validate(const StochasticConfig& cfg, const SystemParams& params);

double coherence_decay(const StochasticConfig& cfg, const SystemParams& params);

struct NoiseDiagnostics
{
  /// Ensemble mean of the per-trajectory time average of Omega.
  double mean_re = 0.0, mean_im = 0.0;
  /// Standard error of each component of that mean.
  double mean_se = 0.0;
  /// Estimated integral of <Omega*(t) Omega(t + tau)> over all tau.
  double correlation_integral = 0.0;
};

struct EnsembleResult
{
  /// Sample times, snapped to the integration grid.
  std::vector<double> times;
  std::vector<PopulationState> mean;
  std::vector<PopulationState> standard_error;
  /// Largest per-trajectory |trace - 1| seen at the samples.
  double max_trace_error = 0.0;
  NoiseDiagnostics noise;
  double step = 0.0;  // step actually used, <= cfg.dt
  long n_trajectories = 0;
  /// Per-trajectory mean of rho_bb over the samples; used for paired
  /// discrepancy estimates.
  std::vector<double> trajectory_bb_average;
};

/// Integrates (rho_aa, rho_cc, rho_ac) per trajectory with Omega a complex
/// Ornstein-Uhlenbeck process (correlation time 1/B, stationary variance
/// R B / 2), frozen within each step. The coherence decay is propagated
/// exactly and the rest by fourth-order Runge-Kutta in the interaction
/// picture; rho_bb follows from the trace. Trajectories use independent RNG
/// streams derived from (seed, index) and are reduced in a fixed order, so
/// results do not depend on the thread count.
EnsembleResult simulate_stochastic(const SystemParams& params, const StochasticConfig& cfg,
                                   const PopulationState& initial, double t_end,
                                   std::span<const double> output_times);

/// Rate-equation populations with the collective rate held at `gamma`, for
/// comparison against the ensemble.
std::vector<PopulationState> rate_reference(const SystemParams& params, double gamma,
                                            const PopulationState& initial, double t_end,
                                            std::span<const double> output_times);

struct Discrepancy
{
  /// Mean over samples of (ensemble rho_bb - reference rho_bb).
  double value = 0.0;
  /// Standard error from the per-trajectory sample averages.
  double standard_error = 0.0;
  /// Largest |ensemble - reference| / SE over samples and populations.
  double max_sigma = 0.0;
};

Discrepancy discrepancy(const EnsembleResult& ensemble, std::span<const PopulationState> reference);

struct BandwidthConvergence
{
  EnsembleResult base;  // bandwidth B
  EnsembleResult doubled;  // bandwidth 2B
  std::vector<PopulationState> reference;
  Discrepancy base_discrepancy, doubled_discrepancy;
  /// D(2B) / D(B) and its standard error. Both runs share the step and the
  /// seed, so their pump processes are driven by the same increments and the
  /// error is estimated from per-trajectory pairs.
  double ratio = 0.0;
  double ratio_se = 0.0;
};

/// Runs the ensemble at cfg.bandwidth and twice that, with the step set by the
/// larger bandwidth, against the rate-equation reference.
BandwidthConvergence bandwidth_convergence(const SystemParams& params, const StochasticConfig& cfg,
                                           const PopulationState& initial, double t_end,
                                           std::span<const double> output_times);

}  // namespace radtrap
