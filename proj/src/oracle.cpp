#include "radtrap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "radtrap/integrators.hpp"
#include "radtrap/parallel.hpp"

namespace radtrap {

namespace {

using cplx = std::complex<double>;

constexpr std::size_t kChunk = 64;

struct Bloch
{
  double aa, cc;
  cplx ac;
};

Bloch axpy(const Bloch& y, double h, const Bloch& k)
{
  return {y.aa + h * k.aa, y.cc + h * k.cc, y.ac + h * k.ac};
}

// Everything except the coherence decay, which is propagated exactly.
Bloch drift(const Bloch& y, cplx omega, const SystemParams& p, double gamma)
{
  const double bb = 1.0 - y.aa - y.cc;
  const double coupling = -2.0 * std::imag(std::conj(omega) * y.ac);
  return {
      -(p.gamma + p.gamma_prime + gamma) * y.aa + gamma * bb + coupling,
      p.gamma_prime * y.aa + p.gamma0 * bb - p.gamma0 * y.cc - coupling,
      cplx(0.0, 1.0) * omega * (y.aa - y.cc),
  };
}

Bloch propagate(const Bloch& y, cplx factor)
{
  return {y.aa, y.cc, factor * y.ac};
}

// Fourth-order Runge-Kutta in the interaction picture of the coherence decay.
Bloch lawson_step(const Bloch& y, cplx omega, double h, cplx half, cplx full,
                  const SystemParams& p, double gamma)
{
  const Bloch k1 = drift(y, omega, p, gamma);
  const Bloch k2 = drift(propagate(axpy(y, 0.5 * h, k1), half), omega, p, gamma);
  const Bloch k3 = drift(axpy(propagate(y, half), 0.5 * h, k2), omega, p, gamma);
  const Bloch k4 = drift(axpy(propagate(y, full), h, propagate(k3, half)), omega, p, gamma);
  const Bloch k1f = propagate(k1, full);
  const Bloch k23 = propagate({k2.aa + k3.aa, k2.cc + k3.cc, k2.ac + k3.ac}, half);
  const Bloch yf = propagate(y, full);
  return {
      yf.aa + h / 6.0 * (k1f.aa + 2.0 * k23.aa + k4.aa),
      yf.cc + h / 6.0 * (k1f.cc + 2.0 * k23.cc + k4.cc),
      yf.ac + h / 6.0 * (k1f.ac + 2.0 * k23.ac + k4.ac),
  };
}

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::size_t index)
{
  const auto i = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
  return std::mt19937_64(seq);
}

struct ChunkSums
{
  std::vector<Eigen::Vector3d> sum, sumsq;
  double max_trace_error = 0.0;
};

}  // namespace

void validate(const StochasticConfig& cfg, const SystemParams& p)
{
  validate(p);
  const double fastest =
      std::max({p.gamma, p.gamma_prime, cfg.pump_rate, cfg.collective_rate});
  if (!(cfg.bandwidth >= 10.0 * fastest)) {
    throw InvalidArgument("bandwidth " + std::to_string(cfg.bandwidth) +
                          " must be at least 10x the fastest rate " + std::to_string(fastest));
  }
  if (!(cfg.dt > 0.0) || cfg.dt > 0.1 / cfg.bandwidth * (1.0 + 1e-12))
    throw InvalidArgument("dt must lie in (0, 0.1 / bandwidth]");
  if (cfg.n_trajectories < 100)
    throw InvalidArgument("n_trajectories must be >= 100");
  if (!(cfg.pump_rate >= 0.0) || cfg.pump_rate != p.pump_rate)
    throw InvalidArgument("stochastic pump_rate must equal the system pump_rate");
  if (!(cfg.collective_rate >= 0.0) || !std::isfinite(cfg.collective_rate))
    throw InvalidArgument("collective_rate must be finite and >= 0");
  if (!std::isfinite(cfg.delta_ac))
    throw InvalidArgument("delta_ac must be finite");
  if (cfg.gamma_ac && !(*cfg.gamma_ac > 0.0 && std::isfinite(*cfg.gamma_ac)))
    throw InvalidArgument("gamma_ac must be finite and > 0");
  if (cfg.noise_trajectories < 0)
    throw InvalidArgument("noise_trajectories must be >= 0");
}

double coherence_decay(const StochasticConfig& cfg, const SystemParams& p)
{
  return cfg.gamma_ac.value_or(0.5 * (p.gamma + p.gamma_prime + cfg.collective_rate) +
                               0.5 * p.gamma0);
}

EnsembleResult simulate_stochastic(const SystemParams& p, const StochasticConfig& cfg,
                                   const PopulationState& initial, double t_end,
                                   std::span<const double> output_times)
{
  validate(cfg, p);
  validate(initial);
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    throw InvalidArgument("t_end must be finite and > 0");
  if (output_times.empty())
    throw DegenerateGrid("output grid is empty");

  const long n_steps = static_cast<long>(std::ceil(t_end / cfg.dt - 1e-9));
  const double h = t_end / static_cast<double>(n_steps);

  EnsembleResult out;
  out.step = h;
  out.n_trajectories = cfg.n_trajectories;
  std::vector<long> sample_steps;
  for (double t : output_times) {
    if (t < 0.0 || t > t_end * (1 + 1e-12))
      throw InvalidArgument("output times must lie in [0, t_end]");
    const long k = std::lround(t / h);
    if (!sample_steps.empty() && k <= sample_steps.back())
      throw InvalidArgument("output times must be increasing and at least one step apart");
    sample_steps.push_back(k);
    out.times.push_back(static_cast<double>(k) * h);
  }
  const std::size_t n_samples = sample_steps.size();

  const double gamma = cfg.collective_rate;
  const cplx z(coherence_decay(cfg, p), cfg.delta_ac);
  const cplx half = std::exp(-0.5 * h * z);
  const cplx full = std::exp(-h * z);
  const double sigma = std::sqrt(0.5 * cfg.pump_rate * cfg.bandwidth);
  const double decay = std::exp(-cfg.bandwidth * h);
  const double kick = sigma * std::sqrt(-std::expm1(-2.0 * cfg.bandwidth * h));

  const auto n_traj = static_cast<std::size_t>(cfg.n_trajectories);
  const std::size_t n_noise = std::min<std::size_t>(n_traj, static_cast<std::size_t>(cfg.noise_trajectories));
  std::vector<std::vector<cplx>> noise(n_noise);
  std::vector<cplx> omega_average(n_traj);
  out.trajectory_bb_average.assign(n_traj, 0.0);

  const std::size_t n_chunks = (n_traj + kChunk - 1) / kChunk;
  std::vector<ChunkSums> chunks(n_chunks);

  auto run_chunk = [&](std::size_t c) {
    ChunkSums& acc = chunks[c];
    acc.sum.assign(n_samples, Eigen::Vector3d::Zero());
    acc.sumsq.assign(n_samples, Eigen::Vector3d::Zero());
    const std::size_t end = std::min(n_traj, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      std::mt19937_64 rng = trajectory_rng(cfg.seed, i);
      // Unit complex normal: E|xi|^2 = 1.
      std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
      auto xi = [&] {
        const double re = normal(rng);
        return cplx(re, normal(rng));
      };

      cplx omega = sigma * xi();
      Bloch y{initial.aa(), initial.cc(), cplx(0.0)};
      std::vector<cplx>* kept = i < n_noise ? &noise[i] : nullptr;
      if (kept)
        kept->reserve(static_cast<std::size_t>(n_steps) + 1);
      cplx omega_sum(0.0);
      double bb_sum = 0.0;
      std::size_t next = 0;

      auto sample = [&] {
        const PopulationState s(y.aa, 1.0 - y.aa - y.cc, y.cc);
        const Eigen::Vector3d v = s.vector();
        acc.sum[next] += v;
        acc.sumsq[next] += v.cwiseProduct(v);
        acc.max_trace_error = std::max(acc.max_trace_error, std::abs(s.trace() - 1.0));
        bb_sum += s.bb();
        ++next;
      };

      for (long step = 0; step <= n_steps; ++step) {
        while (next < n_samples && sample_steps[next] == step)
          sample();
        if (step == n_steps)
          break;
        if (kept)
          kept->push_back(omega);
        omega_sum += omega;
        y = lawson_step(y, omega, h, half, full, p, gamma);
        omega = decay * omega + kick * xi();
      }
      omega_average[i] = omega_sum / static_cast<double>(n_steps);
      out.trajectory_bb_average[i] = bb_sum / static_cast<double>(n_samples);
    }
  };
  parallel_for(n_chunks, worker_threads(cfg.threads, n_chunks), run_chunk);

  std::vector<Eigen::Vector3d> sum(n_samples, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> sumsq(n_samples, Eigen::Vector3d::Zero());
  for (const ChunkSums& c : chunks) {
    for (std::size_t k = 0; k < n_samples; ++k) {
      sum[k] += c.sum[k];
      sumsq[k] += c.sumsq[k];
    }
    out.max_trace_error = std::max(out.max_trace_error, c.max_trace_error);
  }
  const double n = static_cast<double>(n_traj);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Eigen::Vector3d mean = sum[k] / n;
    const Eigen::Vector3d var =
        ((sumsq[k] - n * mean.cwiseProduct(mean)) / (n - 1.0)).cwiseMax(0.0);
    const Eigen::Vector3d se = (var / n).cwiseSqrt();
    out.mean.emplace_back(mean);
    out.standard_error.emplace_back(se);
  }

  // Noise diagnostics.
  cplx mean_omega(0.0);
  for (const cplx& w : omega_average)
    mean_omega += w;
  mean_omega /= n;
  double var_re = 0.0, var_im = 0.0;
  for (const cplx& w : omega_average) {
    var_re += std::norm(w.real() - mean_omega.real());
    var_im += std::norm(w.imag() - mean_omega.imag());
  }
  out.noise.mean_re = mean_omega.real();
  out.noise.mean_im = mean_omega.imag();
  out.noise.mean_se = std::sqrt(std::max(var_re, var_im) / (n - 1.0) / n);

  if (n_noise > 0) {
    // Lags out to ten correlation times.
    const auto max_lag = std::min<long>(n_steps - 1,
                                        static_cast<long>(std::ceil(10.0 / (cfg.bandwidth * h))));
    double integral = 0.0;
    for (long lag = 0; lag <= max_lag; ++lag) {
      cplx c(0.0);
      long count = 0;
      for (const auto& w : noise) {
        for (long t = 0; t + lag < n_steps; ++t)
          c += std::conj(w[static_cast<std::size_t>(t)]) * w[static_cast<std::size_t>(t + lag)];
        count += n_steps - lag;
      }
      c /= static_cast<double>(count);
      integral += (lag == 0 ? 1.0 : 2.0) * c.real();
    }
    out.noise.correlation_integral = integral * h;
  }
  return out;
}

std::vector<PopulationState> rate_reference(const SystemParams& p, double gamma,
                                            const PopulationState& initial, double t_end,
                                            std::span<const double> output_times)
{
  validate(p);
  validate(initial);
  std::vector<PopulationState> states;
  StepControl ctrl;
  ctrl.rtol = 1e-11;
  ctrl.atol = 1e-13;
  integrate_dopri5<3>(
      [&](const Vector3<double>& y) { return rate_rhs(PopulationState(y), p, gamma); },
      initial.vector(), 0.0, t_end, output_times,
      [&](double, const Vector3<double>& y) { states.emplace_back(y); }, ctrl);
  return states;
}

Discrepancy discrepancy(const EnsembleResult& e, std::span<const PopulationState> reference)
{
  if (reference.size() != e.mean.size())
    throw InvalidArgument("reference and ensemble sample counts differ");
  Discrepancy d;
  const double n_samples = static_cast<double>(e.mean.size());
  double reference_bb = 0.0;
  for (std::size_t k = 0; k < e.mean.size(); ++k) {
    reference_bb += reference[k].bb() / n_samples;
    for (int j = 0; j < 3; ++j) {
      const double diff = std::abs(e.mean[k].vector()[j] - reference[k].vector()[j]);
      const double se = e.standard_error[k].vector()[j];
      if (diff > 0.0)
        d.max_sigma = std::max(d.max_sigma, se > 0.0 ? diff / se : INFINITY);
    }
  }

  const auto& avg = e.trajectory_bb_average;
  const double n = static_cast<double>(avg.size());
  double mean = 0.0;
  for (double v : avg)
    mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : avg)
    var += (v - mean) * (v - mean);
  d.value = mean - reference_bb;
  d.standard_error = std::sqrt(var / (n - 1.0) / n);
  return d;
}

BandwidthConvergence bandwidth_convergence(const SystemParams& p, const StochasticConfig& cfg,
                                           const PopulationState& initial, double t_end,
                                           std::span<const double> output_times)
{
  StochasticConfig doubled = cfg;
  doubled.bandwidth = 2.0 * cfg.bandwidth;
  doubled.dt = std::min(cfg.dt, 0.1 / doubled.bandwidth);
  StochasticConfig base = cfg;
  base.dt = doubled.dt;

  BandwidthConvergence out;
  out.base = simulate_stochastic(p, base, initial, t_end, output_times);
  out.doubled = simulate_stochastic(p, doubled, initial, t_end, output_times);
  out.reference = rate_reference(p, cfg.collective_rate, initial, t_end, out.base.times);
  out.base_discrepancy = discrepancy(out.base, out.reference);
  out.doubled_discrepancy = discrepancy(out.doubled, out.reference);

  // Delta method for mean(Y - ref) / mean(X - ref) over paired samples.
  const double dx = out.base_discrepancy.value;
  const double dy = out.doubled_discrepancy.value;
  out.ratio = dy / dx;
  const auto& x = out.base.trajectory_bb_average;
  const auto& y = out.doubled.trajectory_bb_average;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - my) - out.ratio * (x[i] - mx);
    var += r * r;
  }
  out.ratio_se = std::sqrt(var / (n - 1.0) / n) / std::abs(dx);
  return out;
}

}  // namespace radtrap
