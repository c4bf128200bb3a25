#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "radtrap/dynamics.hpp"
#include "radtrap/steadystate.hpp"
#include "radtrap/trapping.hpp"

using namespace radtrap;

namespace {

SystemParams inhom(double k, double gamma0)
{
  SystemParams p;
  p.gamma_prime = 1.0;
  p.pump_rate = 10.0;
  p.gamma0 = gamma0;
  p.regime = Inhomogeneous{100.0, k};
  return p;
}

SystemParams rad(double k0, double gamma0)
{
  SystemParams p = inhom(0.0, gamma0);
  p.regime = Radiative{k0};
  return p;
}

std::vector<double> log_grid(double lo, double hi, int per_decade)
{
  std::vector<double> g;
  const int n = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= n; ++i)
    g.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
  return g;
}

}  // namespace

TEST_CASE("stable target state absorbs everything")
{
  for (const SystemParams& p : {inhom(0.0, 0.0), inhom(100.0, 0.0), rad(10.0, 0.0), rad(1e4, 0.0)}) {
    const StationaryResult r = stationary(p);
    CHECK(r.state.bb() == 1.0);
    CHECK(r.residual == 0.0);
    CHECK(rate_rhs(r.state, p, r.gamma).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("thin medium against a direct linear solve")
{
  for (double g0 : {1e-4, 1e-2, 0.3}) {
    const SystemParams p = inhom(0.0, g0);
    // Rate equations with Gamma = 0 plus the trace row.
    Eigen::Matrix3d a;
    a << -(2.0 + 10.0), 0.0, 10.0,  //
        1.0 + 10.0, g0, -g0 - 10.0,  //
        1.0, 1.0, 1.0;
    const Eigen::Vector3d ref = a.fullPivLu().solve(Eigen::Vector3d(0.0, 0.0, 1.0));
    const StationaryResult r = stationary(p);
    CHECK((r.state.vector() - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((thin_stationary(p).vector() - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dense Doppler medium lowers the target population")
{
  const double thin = stationary(inhom(0.0, 1e-2)).state.bb();
  const double dense = stationary(inhom(1e4, 1e-2)).state.bb();
  CHECK(dense < thin);
}

TEST_CASE("Newton and long-time integration agree on random parameters")
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double density = std::pow(10.0, 4.0 * u(rng));
    const double g0 = std::pow(10.0, -4.0 + 3.0 * u(rng));
    const SystemParams p = i % 2 ? rad(density, g0) : inhom(density, g0);
    CAPTURE(density);
    CAPTURE(g0);
    const StationaryResult r = stationary(p);
    CHECK(r.cross_validated);
    CHECK(r.discrepancy <= 1e-6);
    CHECK(r.residual < 1e-10);
    CHECK(stationary_residual(r.state, p) < 1e-10);
    CHECK(r.state.is_valid());
  }
}

TEST_CASE("impossible tolerance raises NoConvergence")
{
  StationaryOptions o;
  o.tolerance = 1e-30;
  o.restarts = 2;
  CHECK_THROWS_AS(stationary(rad(100.0, 1e-2), o), NoConvergence);
}

TEST_CASE("sweep")
{
  SUBCASE("gamma0 = 0 gives the target state everywhere")
  {
    const std::vector<double> k{0.0, 1.0, 1e2, 1e4, 1e6};
    const std::vector<double> g0{0.0};
    for (const SystemParams& base : {inhom(0.0, 0.0), rad(0.0, 0.0)}) {
      const SweepTable t = sweep(base, k, g0);
      REQUIRE(t.rows.size() == k.size());
      for (const SweepRow& row : t.rows) {
        REQUIRE(row.result);
        CHECK(row.result->state.bb() == 1.0);
      }
    }
  }
  SUBCASE("single point equals stationary()")
  {
    const std::vector<double> k{30.0};
    const std::vector<double> g0{1e-3};
    const SweepTable t = sweep(rad(0.0, 0.0), k, g0);
    const StationaryResult direct = stationary(rad(30.0, 1e-3));
    REQUIRE(t.rows[0].result);
    CHECK((t.rows[0].result->state.vector() - direct.state.vector()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("radiative series are ordered in K0 and in gamma0")
  {
    const auto k = log_grid(1.0, 1e6, 4);
    const std::vector<double> g0{1e-4, 1e-3, 1e-2};
    const SweepTable t = sweep(rad(0.0, 0.0), k, g0);
    REQUIRE(t.rows.size() == k.size() * g0.size());
    for (const SweepRow& row : t.rows) {
      REQUIRE(row.result);
      CHECK(row.result->residual < 1e-10);
    }
    for (std::size_t s = 0; s < g0.size(); ++s) {
      for (std::size_t i = 0; i < k.size(); ++i) {
        const double bb = t.rows[s * k.size() + i].result->state.bb();
        if (i > 0)
          CHECK(bb <= t.rows[s * k.size() + i - 1].result->state.bb() + 1e-9);
        if (s > 0)
          CHECK(bb <= t.rows[(s - 1) * k.size() + i].result->state.bb() + 1e-9);
      }
    }
  }
  SUBCASE("failed rows are recorded and the sweep continues")
  {
    SweepOptions o;
    o.stationary.tolerance = 1e-30;
    o.stationary.restarts = 1;
    const std::vector<double> k{0.0, 100.0};
    const std::vector<double> g0{0.0, 1e-2};
    const SweepTable t = sweep(rad(0.0, 0.0), k, g0, o);
    CHECK(t.rows[0].result);
    CHECK(t.rows[1].result);
    CHECK_FALSE(t.rows[3].result);
    CHECK_FALSE(t.rows[3].error.empty());
  }
  SUBCASE("results do not depend on the thread count")
  {
    const auto k = log_grid(1.0, 1e3, 3);
    const std::vector<double> g0{1e-4, 1e-3, 1e-2};
    SweepOptions one, many;
    one.threads = 1;
    many.threads = 3;
    const SweepTable a = sweep(rad(0.0, 0.0), k, g0, one);
    const SweepTable b = sweep(rad(0.0, 0.0), k, g0, many);
    for (std::size_t i = 0; i < a.rows.size(); ++i)
      CHECK(a.rows[i].result->state.vector() == b.rows[i].result->state.vector());
  }
  SUBCASE("invalid grids")
  {
    const std::vector<double> empty;
    const std::vector<double> one{1.0};
    const std::vector<double> negative{-1.0};
    CHECK_THROWS_AS(sweep(rad(0.0, 0.0), empty, one), InvalidArgument);
    CHECK_THROWS_AS(sweep(rad(0.0, 0.0), negative, one), InvalidArgument);
  }
}
