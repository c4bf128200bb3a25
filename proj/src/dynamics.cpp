#include "radtrap/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "radtrap/trapping.hpp"

namespace radtrap {

namespace {

void check_grid(double t_end, std::span<const double> grid)
{
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    throw InvalidArgument("t_end must be finite and > 0");
  if (grid.empty())
    throw DegenerateGrid("output grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > t_end)
      throw InvalidArgument("output grid must lie in [0, t_end]");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw InvalidArgument("output grid must be strictly increasing");
  }
}

}  // namespace

Trajectory evolve(const SystemParams& params, const PopulationState& initial, double t_end,
                  std::span<const double> output_grid, const EvolveOptions& options)
{
  validate(params);
  validate(initial);
  check_grid(t_end, output_grid);

  Trajectory traj;
  traj.times.reserve(output_grid.size());
  traj.states.reserve(output_grid.size());
  traj.gammas.reserve(output_grid.size());

  bool inverted = false;
  auto record = [&](double t, const PopulationState& s) {
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.gammas.push_back(collective_rate(s, params));
    traj.max_trace_error = std::max(traj.max_trace_error, std::abs(s.trace() - 1.0));
  };

  StepControl ctrl;
  ctrl.rtol = options.rtol;
  ctrl.atol = options.atol;

  if (options.integrator == Integrator::DormandPrince) {
    auto rhs = [&](const Vector3<double>& y) -> Vector3<double> {
      const PopulationState s(y);
      inverted = inverted || s.aa() > s.bb();
      return rate_rhs(s, params, collective_rate(s, params));
    };
    traj.stats = integrate_dopri5<3>(
        rhs, initial.vector(), 0.0, t_end, output_grid,
        [&](double t, const Vector3<double>& y) { record(t, PopulationState(y)); }, ctrl);
  } else {
    // Reduced coordinates (rho_aa, rho_cc); trace closure is exact by construction.
    auto expand = [](const Eigen::Vector2d& v) {
      return PopulationState(v[0], 1.0 - v[0] - v[1], v[1]);
    };
    auto rhs = [&](const Eigen::Vector2d& v) -> Eigen::Vector2d {
      const PopulationState s = expand(v);
      inverted = inverted || s.aa() > s.bb();
      const Vector3<double> d = rate_rhs(s, params, collective_rate(s, params));
      return {d[0], d[2]};
    };
    traj.stats = integrate_rosenbrock23<2>(
        rhs, Eigen::Vector2d(initial.aa(), initial.cc()), 0.0, t_end, output_grid,
        [&](double t, const Eigen::Vector2d& v) { record(t, expand(v)); }, ctrl);
  }
  traj.inversion_seen = inverted;

  // Below ~100 atol the pumped population is integration noise.
  const double floor = 100.0 * options.atol;
  const auto resolved = static_cast<std::size_t>(
      std::find_if(traj.states.begin(), traj.states.end(),
                   [floor](const auto& s) { return !(s.pumped() > floor); }) -
      traj.states.begin());
  if (traj.times.size() >= 3) {
    traj.pump_rates.assign(traj.times.size(), std::numeric_limits<double>::quiet_NaN());
    if (resolved >= 3) {
      std::vector<double> pumped(resolved);
      for (std::size_t i = 0; i < resolved; ++i)
        pumped[i] = traj.states[i].pumped();
      const std::vector<double> rates = effective_pump_rate(
          std::span<const double>(traj.times).first(resolved), pumped);
      std::copy(rates.begin(), rates.end(), traj.pump_rates.begin());
    }
  }
  return traj;
}

std::vector<double> uniform_grid(double t0, double t1, int n)
{
  if (n < 1)
    throw DegenerateGrid("grid needs at least one sample");
  std::vector<double> grid(static_cast<std::size_t>(n));
  if (n == 1) {
    grid[0] = t1;
    return grid;
  }
  for (int i = 0; i < n; ++i)
    grid[static_cast<std::size_t>(i)] = t0 + (t1 - t0) * i / (n - 1);
  grid.back() = t1;
  return grid;
}

double pump_rate_estimate(const SystemParams& params)
{
  const double thin = 0.5 * params.gamma;
  if (const auto* rad = std::get_if<Radiative>(&params.regime))
    return asymptotic_pump_rate_rad(k_tilde(params, rad->density));
  const double k = std::get<Inhomogeneous>(params.regime).density;
  if (k <= 1.0)
    return thin;
  return std::min(thin, asymptotic_pump_rate_inhom(k));
}

double default_t_end(const SystemParams& params)
{
  return std::min(15.0 / pump_rate_estimate(params), 1e7);
}

std::vector<double> effective_pump_rate(std::span<const double> times,
                                        std::span<const double> pumped)
{
  const std::size_t n = times.size();
  if (n < 3 || pumped.size() != n)
    throw DegenerateGrid("effective pump rate needs at least three samples");

  std::vector<double> logs(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pumped[i] > 1e-300))
      throw DomainError("pumped population vanished at t=" + std::to_string(times[i]));
    logs[i] = std::log(pumped[i]);
  }

  // Three-point derivative through (t0, t1, t2) evaluated at `at`.
  auto derivative = [&](std::size_t i0, double at) {
    const double t0 = times[i0], t1 = times[i0 + 1], t2 = times[i0 + 2];
    const double l0 = logs[i0], l1 = logs[i0 + 1], l2 = logs[i0 + 2];
    return l0 * (2 * at - t1 - t2) / ((t0 - t1) * (t0 - t2)) +
           l1 * (2 * at - t0 - t2) / ((t1 - t0) * (t1 - t2)) +
           l2 * (2 * at - t0 - t1) / ((t2 - t0) * (t2 - t1));
  };

  std::vector<double> rates(n);
  rates[0] = -derivative(0, times[0]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    rates[i] = -derivative(i - 1, times[i]);
  rates[n - 1] = -derivative(n - 3, times[n - 1]);
  return rates;
}

std::vector<double> effective_pump_rate(const Trajectory& traj)
{
  std::vector<double> pumped(traj.states.size());
  std::transform(traj.states.begin(), traj.states.end(), pumped.begin(),
                 [](const auto& s) { return s.pumped(); });
  return effective_pump_rate(traj.times, pumped);
}

double asymptotic_pump_rate_inhom(double k)
{
  if (!(k > 1.0))
    throw DomainError("asymptotic inhomogeneous pump rate needs K > 1, got " + std::to_string(k));
  return 1.0 / (2.0 * k * std::sqrt(std::numbers::pi * std::log(k)));
}

double asymptotic_pump_rate_rad(double k_tilde)
{
  if (!(k_tilde >= 0.0))
    throw DomainError("K_tilde must be >= 0");
  return 0.5 * std::exp(-k_tilde);
}

Plateau estimate_asymptote(const Trajectory& traj)
{
  const std::size_t n = traj.times.size();
  if (n < 3)
    throw DegenerateGrid("plateau estimate needs at least three samples");
  if (!(traj.states.back().pumped() < 0.1 * traj.states.front().pumped()))
    throw NotConverged("pumped population has not decayed below 10% of its initial value");

  const std::vector<double> rates =
      traj.pump_rates.size() == n ? traj.pump_rates : effective_pump_rate(traj);
  if (std::any_of(rates.begin(), rates.end(), [](double r) { return std::isnan(r); }))
    throw NotConverged("pumped population fell below the integration tolerance floor");

  const double start = traj.times.front() + 0.8 * (traj.times.back() - traj.times.front());
  std::vector<double> window;
  for (std::size_t i = 0; i < n; ++i) {
    if (traj.times[i] >= start)
      window.push_back(rates[i]);
  }
  if (window.size() < 2)
    throw DegenerateGrid("final 20% of the window holds fewer than two samples");

  std::vector<double> sorted = window;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);

  Plateau out;
  out.rate = median;
  out.spread = (sorted.back() - sorted.front()) / std::abs(median);
  if (!(out.spread <= 0.1)) {
    throw NotConverged("pump rate plateau spread " + std::to_string(out.spread) +
                       " exceeds 10%");
  }
  return out;
}

}  // namespace radtrap
