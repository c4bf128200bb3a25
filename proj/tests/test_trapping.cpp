#include <doctest.h>

#include <cmath>
#include <random>

#include "radtrap/quadrature.hpp"
#include "radtrap/steadystate.hpp"
#include "radtrap/trapping.hpp"
#include "support/oracles.hpp"

using namespace radtrap;
using radtrap::testing::adaptive_gamma_avg_inhom;
using radtrap::testing::damped_picard;

namespace {

SystemParams radiative(double k0, double gamma0 = 0.0)
{
  SystemParams p;
  p.gamma_prime = 1.0;
  p.pump_rate = 10.0;
  p.gamma0 = gamma0;
  p.regime = Radiative{k0};
  return p;
}

const PopulationState kState(0.1, 0.5, 0.4);

double rel(double a, double b)
{
  return std::abs(a - b) / std::abs(b);
}

}  // namespace

TEST_CASE("Gauss-Hermite and Gauss-Legendre rules")
{
  const auto two = gauss_hermite(2);
  CHECK(two.nodes[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(two.weights[0] == doctest::Approx(std::sqrt(std::numbers::pi) / 2).epsilon(1e-15));

  const auto gh = gauss_hermite(64);
  CHECK(gh.weights.sum() == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-14));
  // int y^2 exp(-y^2) = sqrt(pi)/2; int y^4 exp(-y^2) = 3 sqrt(pi)/4.
  CHECK(gh.weights.dot(gh.nodes.array().square().matrix()) ==
        doctest::Approx(std::sqrt(std::numbers::pi) / 2).epsilon(1e-13));
  CHECK(gh.weights.dot(gh.nodes.array().pow(4).matrix()) ==
        doctest::Approx(0.75 * std::sqrt(std::numbers::pi)).epsilon(1e-13));
  CHECK((gh.nodes + gh.nodes.reverse()).cwiseAbs().maxCoeff() == 0.0);

  const auto gl = gauss_legendre(10);
  CHECK(gl.weights.sum() == doctest::Approx(2.0).epsilon(1e-15));
  // Exact for degree 19.
  CHECK(gl.weights.dot(gl.nodes.array().pow(18).matrix()) ==
        doctest::Approx(2.0 / 19.0).epsilon(1e-14));
}

TEST_CASE("escape factor and the regularization seam")
{
  CHECK(escape_factor(0.0) == 1.0);
  CHECK(escape_factor(1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  const double below = escape_factor(kSeriesThreshold * (1 - 1e-12));
  const double above = escape_factor(kSeriesThreshold * (1 + 1e-12));
  CHECK(rel(below, above) < 1e-12);
  const double u = kSeriesThreshold;
  CHECK(rel(1.0 - u / 2, -std::expm1(-u) / u) < 1e-12);

  // Crossing rho_bb = rho_aa through the seam.
  const double k = 1.0;
  const double lo = gamma_spectral_inhom(PopulationState(0.3, 0.3 + 0.999e-6, 0.4 - 0.999e-6), k, 0.0);
  const double hi = gamma_spectral_inhom(PopulationState(0.3, 0.3 + 1.001e-6, 0.4 - 1.001e-6), k, 0.0);
  CHECK(rel(lo, hi) < 1e-8);
  CHECK(gamma_spectral_inhom(PopulationState(0.3, 0.3, 0.4), k, 0.0) == doctest::Approx(0.3));
}

TEST_CASE("gamma_spectral_inhom")
{
  CHECK(gamma_spectral_inhom(kState, 0.0, 0.3) == 0.0);
  CHECK(gamma_spectral_inhom(PopulationState(0.0, 0.6, 0.4), 50.0, 0.3) == 0.0);
  const double v = gamma_spectral_inhom(kState, 1e-3, 0.0);
  CHECK(rel(v, 1e-4) < 2e-4);
  CHECK(rel(v, 9.9980002666400021332e-5) < 1e-14);
  // Doppler factor exp(-delta^2/2) enters H.
  const double off = gamma_spectral_inhom(kState, 10.0, 1.5);
  const double f = std::exp(-0.5 * 1.5 * 1.5);
  CHECK(rel(off, 0.1 * -std::expm1(-10.0 * 0.4 * f) / 0.4) < 1e-14);
}

TEST_CASE("gamma_avg_inhom frozen values")
{
  CHECK(gamma_avg_inhom(kState, 0.0) == 0.0);
  CHECK(rel(gamma_avg_inhom(kState, 1e-3), 0.1 * 1e-3 / std::sqrt(2.0)) < 1e-3);
  CHECK(rel(gamma_avg_inhom(kState, 1e-3), 7.0699132446485045008e-5) < 1e-12);
  CHECK(rel(gamma_avg_inhom(kState, 1.0), 0.060385948290522648956) < 1e-12);
  CHECK(rel(gamma_avg_inhom(kState, 10.0), 0.21947939800444640408) < 1e-12);
  CHECK(rel(gamma_avg_inhom(kState, 100.0), 0.24823877025134049593) < 1e-12);
  CHECK(rel(gamma_avg_inhom(kState, 1e4), 0.24998807546445352526) < 1e-12);
  const double k100 = gamma_avg_inhom(kState, 100.0);
  CHECK(k100 > 0.0);
  CHECK(k100 < 0.25);
}

TEST_CASE("gamma_avg_inhom against adaptive quadrature")
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    const double aa = 0.5 * u(rng);
    const double bb = aa + 1e-3 + (1.0 - 2.0 * aa - 1e-3) * u(rng);
    const double k = i % 10 == 0 ? u(rng) : std::pow(10.0, -3.0 + 7.0 * u(rng));
    const PopulationState s(aa, bb, 1.0 - aa - bb);
    const double ref = adaptive_gamma_avg_inhom(aa, bb, k);
    if (ref > 0.0)
      worst = std::max(worst, rel(gamma_avg_inhom(s, k), ref));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("gamma_avg_inhom matches a 200-node Gauss-Hermite rule where that rule converges")
{
  const auto gh = gauss_hermite(200);
  for (double k : {1e-2, 0.5, 2.0}) {
    const double x = kState.difference();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < gh.nodes.size(); ++i)
      sum += gh.weights[i] * -std::expm1(-k * x * std::exp(-gh.nodes[i] * gh.nodes[i]));
    const double ref = kState.aa() * sum / std::sqrt(std::numbers::pi) / x;
    CHECK(rel(gamma_avg_inhom(kState, k), ref) < 1e-10);
  }
}

TEST_CASE("gamma_avg_inhom is increasing in K and bounded")
{
  const double bound = kState.aa() / kState.difference();
  double prev = 0.0;
  for (double k = 1e-3; k < 1e5; k *= 1.7) {
    const double v = gamma_avg_inhom(kState, k);
    CHECK(v > prev);
    CHECK(v < bound);
    prev = v;
  }
}

TEST_CASE("radiative self-consistent rate")
{
  const SystemParams p = radiative(10.0);
  CHECK(gamma_ab(p) == 6.0);
  const double star = gamma_selfconsistent_rad(kState, p, 10.0);
  CHECK(rel(star, 0.1199574631080390424) < 1e-13);

  auto g = [](double gamma) { return 0.25 * -std::expm1(-4.0 / (6.0 + gamma)); };
  CHECK(std::abs(star - damped_picard(g, 0.0)) < 1e-9);
  CHECK(std::abs(star - gamma_rad_rhs(kState, p, 10.0, star)) < 1e-10);

  CHECK(gamma_selfconsistent_rad(PopulationState(0.0, 0.6, 0.4), p, 10.0) == 0.0);
  CHECK(gamma_selfconsistent_rad(kState, radiative(0.0), 0.0) == 0.0);
  CHECK_THROWS_AS(gamma_selfconsistent_rad(PopulationState(0.5, 0.3, 0.2), p, 10.0),
                  InversionError);
  CHECK_NOTHROW(gamma_selfconsistent_rad(PopulationState(0.4, 0.4 - 5e-10, 0.2 + 5e-10), p, 10.0));
}

TEST_CASE("radiative fixed-point residual over random states")
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double aa = 0.5 * u(rng);
    const double bb = aa + (1.0 - 2.0 * aa) * u(rng);
    const PopulationState s(aa, bb, 1.0 - aa - bb);
    const double k0 = std::pow(10.0, -2.0 + 7.0 * u(rng));
    const SystemParams p = radiative(k0, 0.01 * u(rng));
    const double star = gamma_selfconsistent_rad(s, p, k0);
    worst = std::max(worst, std::abs(star - gamma_rad_rhs(s, p, k0, star)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("gamma_spectral_rad")
{
  const SystemParams p = radiative(10.0);
  const double star = gamma_selfconsistent_rad(kState, p, 10.0);
  CHECK(rel(gamma_spectral_rad(kState, p, 10.0, star, 0.0), star) < 1e-10);

  const double d = 1e6;
  const double tail = kState.aa() * k_tilde(p, 10.0) * gamma_ab(p) * (gamma_ab(p) + star) / (d * d);
  CHECK(rel(gamma_spectral_rad(kState, p, 10.0, star, d), tail) < 1e-6);
  CHECK(gamma_spectral_rad(PopulationState(0.0, 0.6, 0.4), p, 10.0, 0.0, 3.0) == 0.0);
}

TEST_CASE("absorption spectrum")
{
  const SystemParams p = radiative(10.0);
  const double star = 0.3;
  const double width = gamma_ab(p) + star;
  const Eigen::VectorXd deltas = Eigen::VectorXd::LinSpaced(4001, -40.0, 40.0);
  const Spectrum a = absorption_spectrum(kState, p, star, deltas);
  CHECK(a.values[2000] == 1.0);
  Eigen::VectorXd at(3);
  at << -width, 0.0, width;
  const Spectrum b = absorption_spectrum(kState, p, star, at);
  CHECK(b.values[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.values[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(full_width_half_max(a) - 2.0 * width) < 0.02);

  Eigen::VectorXd unsorted(2);
  unsorted << 1.0, 0.0;
  CHECK_THROWS_AS(absorption_spectrum(kState, p, star, unsorted), InvalidArgument);
}

TEST_CASE("spectral distribution")
{
  const Eigen::VectorXd deltas = Eigen::VectorXd::LinSpaced(801, -40.0, 40.0);

  SUBCASE("peak normalization")
  {
    for (double k0 : {1.0, 10.0, 100.0}) {
      const Spectrum s = spectral_distribution(kState, radiative(k0), deltas);
      CHECK(s.values[400] == 1.0);
      CHECK(std::abs(s.values.maxCoeff() - 1.0) < 1e-12);
      CHECK(s.values.minCoeff() >= 0.0);
    }
  }
  SUBCASE("area normalization")
  {
    const Spectrum s = spectral_distribution(kState, radiative(10.0), deltas, Normalization::Area);
    double area = 0.0;
    for (Eigen::Index i = 1; i < deltas.size(); ++i)
      area += 0.5 * (s.values[i] + s.values[i - 1]) * (deltas[i] - deltas[i - 1]);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("thin Doppler medium recovers the Gaussian")
  {
    SystemParams p = radiative(0.0);
    p.regime = Inhomogeneous{100.0, 1e-7};
    const Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(161, -4.0, 4.0);
    const Spectrum s = spectral_distribution(kState, p, d);
    for (Eigen::Index i = 0; i < d.size(); ++i)
      CHECK(std::abs(s.values[i] - std::exp(-0.5 * d[i] * d[i])) < 1e-6);
  }
  SUBCASE("trapped radiation is broader than the absorption line for K0 >= 10")
  {
    for (double k0 : {10.0, 30.0, 100.0, 1000.0}) {
      const SystemParams p = radiative(k0, 1e-4);
      const StationaryResult st = stationary(p);
      const Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(4001, -200.0, 200.0);
      const Spectrum trapped = spectral_distribution(st.state, p, d);
      const Spectrum absorption = absorption_spectrum(st.state, p, st.gamma, d);
      CHECK(full_width_half_max(trapped) >= full_width_half_max(absorption));
    }
  }
}
