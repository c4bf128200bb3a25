#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radtrap/model.hpp"

namespace radtrap {

struct StationaryOptions
{
  /// Required max |d rho / dt| at the returned state.
  double tolerance = 1e-10;
  int max_newton_steps = 500;
  int restarts = 10;
  std::uint64_t restart_seed = 20240601;
  /// Newton starting point; the Gamma = 0 linear solution when empty.
  std::optional<PopulationState> initial_guess;
  /// Also integrate from equal lower populations to t = 1e3 / max(gamma0,
  /// pump_rate_estimate) and require agreement to `agreement` per population.
  /// Skipped when that rate is below 1e-9 gamma (dense radiative media with
  /// gamma0 = 0), where the drift is under the rounding floor.
  bool cross_validate = true;
  double agreement = 1e-6;
};

struct StationaryResult
{
  PopulationState state;
  double gamma = 0.0;  // self-consistent collective rate at `state`
  double residual = 0.0;
  int newton_steps = 0;
  int restarts_used = 0;
  /// Newton state, before being replaced by the integrated one.
  PopulationState newton_state;
  bool cross_validated = false;
  /// Max per-population |Newton - integration|; NaN without cross-validation.
  double discrepancy = 0.0;
};

/// max |d rho / dt| at `s` with its own collective rate.
double stationary_residual(const PopulationState& s, const SystemParams& p);

/// Stationary populations with a self-consistent collective rate. Damped
/// Newton on (rho_aa, rho_cc) with rho_bb by closure; analytic rate-equation
/// Jacobian plus a finite-difference column for d Gamma / d rho. When the
/// cross-check integration converges with a residual no larger than Newton's,
/// its state is returned. Throws NoConvergence.
StationaryResult stationary(const SystemParams& p, const StationaryOptions& options = {});

/// Stationary population of the Gamma = 0 (optically thin) linear system.
PopulationState thin_stationary(const SystemParams& p);

struct SweepRow
{
  double density = 0.0;  // K or K0
  double gamma0 = 0.0;
  std::optional<StationaryResult> result;
  std::string error;  // non-empty when the row failed
};

struct SweepTable
{
  bool radiative = false;
  /// Ordered by gamma0 (outer, as given) then density (inner, as given).
  std::vector<SweepRow> rows;
};

struct SweepOptions
{
  StationaryOptions stationary;
  /// Worker threads over gamma0 series; 0 = RADTRAP_THREADS or hardware.
  unsigned threads = 0;
};

/// One stationary solve per (density, gamma0) pair. Within a gamma0 series the
/// previous solution seeds the next Newton solve; series run concurrently.
/// Failures are recorded per row and the sweep continues.
SweepTable sweep(const SystemParams& base, std::span<const double> densities,
                 std::span<const double> gamma0_list, const SweepOptions& options = {});

}  // namespace radtrap
