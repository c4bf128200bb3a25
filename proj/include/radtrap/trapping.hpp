#pragma once

#include <Eigen/Core>

#include "radtrap/model.hpp"

namespace radtrap {

enum class Normalization { Peak, Area, None };

/// Sampled spectral density on a strictly increasing detuning grid. Detunings
/// are Delta/gamma (radiative) or Delta/Delta_D (inhomogeneous). With Peak
/// normalization the spectrum is divided by its value at Delta = 0, so the
/// maximum is 1 whenever the grid contains zero detuning.
struct Spectrum
{
  Eigen::VectorXd detunings;
  Eigen::VectorXd values;
  Normalization normalization = Normalization::None;
};

/// Series threshold for the removable singularity at rho_bb = rho_aa.
inline constexpr double kSeriesThreshold = 1e-6;

/// (1 - exp(-u)) / u, replaced by 1 - u/2 for |u| < kSeriesThreshold.
double escape_factor(double u);

/// Collective rate at detuning Delta/Delta_D in a Doppler-broadened medium:
/// gamma rho_aa [1 - exp(-K x f)] / x with x = rho_bb - rho_aa, f = exp(-delta^2/2).
double gamma_spectral_inhom(const PopulationState& s, double k, double delta_over_dw);

/// Velocity average of gamma_spectral_inhom. Gauss-Hermite (64 nodes) while
/// |K x| <= 1; above that the integrand develops a sharp shoulder at
/// y = sqrt(ln |K x|) and composite Gauss-Legendre panels are placed around it.
double gamma_avg_inhom(const PopulationState& s, double k);

/// Self-consistent collective rate of a radiatively broadened medium at
/// resonance: the unique root of Gamma = gamma rho_aa psi(Gamma) / x.
/// Throws InversionError if rho_aa > rho_bb + 1e-9, NoConvergence after 200
/// iterations.
double gamma_selfconsistent_rad(const PopulationState& s, const SystemParams& p, double k0);

/// Right-hand side of the radiative fixed-point equation; exposed for tests
/// and diagnostics.
double gamma_rad_rhs(const PopulationState& s, const SystemParams& p, double k0,
                     double collective);

/// Spectral collective rate at detuning delta (units of gamma), given the
/// resonant self-consistent rate `gamma_star`.
double gamma_spectral_rad(const PopulationState& s, const SystemParams& p, double k0,
                          double gamma_star, double delta);

/// Collective rate for the regime carried in `p`.
double collective_rate(const PopulationState& s, const SystemParams& p);

/// Peak-normalized Lorentzian absorption profile of width gamma_ab + gamma_star.
Spectrum absorption_spectrum(const PopulationState& s, const SystemParams& p,
                             double gamma_star, const Eigen::VectorXd& deltas);

/// Normalized spectrum of the trapped incoherent radiation, Gamma(omega) for the
/// regime carried in `p`. `s` is expected to be stationary.
Spectrum spectral_distribution(const PopulationState& s, const SystemParams& p,
                               const Eigen::VectorXd& deltas,
                               Normalization norm = Normalization::Peak);

/// Full width at half maximum, read off by linear interpolation of the two
/// outermost half-maximum crossings around the peak sample.
double full_width_half_max(const Spectrum& spectrum);

}  // namespace radtrap
