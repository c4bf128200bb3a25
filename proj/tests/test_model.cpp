#include <doctest.h>

#include <random>

#include "radtrap/model.hpp"

using namespace radtrap;

namespace {

SystemParams fig_params(double gamma0 = 0.0)
{
  SystemParams p;
  p.gamma_prime = 1.0;
  p.pump_rate = 10.0;
  p.gamma0 = gamma0;
  return p;
}

}  // namespace

TEST_CASE("gamma_ab")
{
  CHECK(gamma_ab(fig_params()) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(gamma_ab(fig_params(0.01)) == doctest::Approx(6.005).epsilon(1e-15));

  SystemParams bare;
  bare.gamma_prime = 0.0;
  bare.pump_rate = 0.0;
  CHECK(gamma_ab(bare) == 0.5);
}

TEST_CASE("rate_rhs fixed values")
{
  SUBCASE("target state is a fixed point")
  {
    const auto d = rate_rhs(PopulationState(0.0, 1.0, 0.0), fig_params(), 0.0);
    CHECK(d.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("equal lower populations")
  {
    const auto d = rate_rhs(PopulationState(0.0, 0.5, 0.5), fig_params(), 0.0);
    CHECK(d[0] == doctest::Approx(5.0));
    CHECK(d[1] == doctest::Approx(0.0));
    CHECK(d[2] == doctest::Approx(-5.0));
  }
  SUBCASE("exact rational substitution")
  {
    // (6/5, -21/50, -39/50) from a symbolic evaluation.
    const auto d = rate_rhs(PopulationState(0.2, 0.5, 0.3), fig_params(0.1), 2.0);
    CHECK(d[0] == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(d[1] == doctest::Approx(-0.42).epsilon(1e-14));
    CHECK(d[2] == doctest::Approx(-0.78).epsilon(1e-14));
  }
}

TEST_CASE("rate_rhs properties")
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    SystemParams p;
    p.gamma_prime = 5 * u(rng);
    p.gamma0 = u(rng);
    p.pump_rate = 20 * u(rng);
    const double g = 10 * u(rng);
    double a = u(rng), b = u(rng), c = u(rng);
    const double t = a + b + c;
    const PopulationState s(a / t, b / t, c / t);

    const auto d = rate_rhs(s, p, g);
    CHECK(std::abs(d.sum()) <= 1e-15 * std::max(1.0, d.cwiseAbs().maxCoeff()));

    // Linear in Gamma.
    const auto d0 = rate_rhs(s, p, 0.0);
    const double x = s.bb() - s.aa();
    CHECK((d - d0 - g * Vector3<double>(x, -x, 0.0)).cwiseAbs().maxCoeff() <= 1e-12);

    // Positivity preservation on each face of the simplex.
    for (int zero = 0; zero < 3; ++zero) {
      Vector3<double> v = s.vector();
      v[zero] = 0.0;
      v /= v.sum();
      CHECK(rate_rhs(PopulationState(v), p, g)[zero] >= 0.0);
    }
  }
}

TEST_CASE("validation")
{
  CHECK_NOTHROW(validate(fig_params()));
  SystemParams p = fig_params();
  p.gamma = 2.0;
  CHECK_THROWS_AS(validate(p), InvalidArgument);
  p = fig_params();
  p.pump_rate = -1.0;
  CHECK_THROWS_AS(validate(p), InvalidArgument);
  p = fig_params();
  p.gamma0 = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(p), InvalidArgument);
  p = fig_params();
  p.regime = Inhomogeneous{0.0, 1.0};
  CHECK_THROWS_AS(validate(p), InvalidArgument);
  p.regime = Radiative{-1.0};
  CHECK_THROWS_AS(validate(p), InvalidArgument);

  CHECK_NOTHROW(validate(PopulationState(0.2, 0.5, 0.3)));
  CHECK_THROWS_AS(validate(PopulationState(0.2, 0.5, 0.31)), InvalidArgument);
  CHECK_THROWS_AS(validate(PopulationState(-0.1, 0.6, 0.5)), InvalidArgument);
}

TEST_CASE("density parameters")
{
  SystemParams p = fig_params();
  CHECK(k_tilde(p, 12.0) == doctest::Approx(2.0));
  CHECK(density_param_rad(2.0 * 3.141592653589793) == doctest::Approx(1.0));
  // K = N lambda^2 d / (sqrt(2 pi) Delta_D) in units of gamma.
  CHECK(density_param_inhom(2.5066282746310002 * 100.0, 100.0) == doctest::Approx(1.0));

  p.regime = Radiative{3.0};
  CHECK(is_radiative(p.regime));
  CHECK(density_param(with_density(p, 7.0).regime) == 7.0);
}
