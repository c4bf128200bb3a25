#include "radtrap/trapping.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "radtrap/quadrature.hpp"

namespace radtrap {

namespace {

constexpr int kHermiteNodes = 64;
constexpr int kLegendreNodes = 10;
// exp(-y^2) < 3e-19 beyond this, negligible against the velocity average.
constexpr double kVelocityCutoff = 6.5;
constexpr int kMaxFixedPointIterations = 200;

const QuadratureRule& hermite_rule()
{
  static const QuadratureRule rule = gauss_hermite(kHermiteNodes);
  return rule;
}

const QuadratureRule& legendre_rule()
{
  static const QuadratureRule rule = gauss_legendre(kLegendreNodes);
  return rule;
}

// Panel edges on [0, kVelocityCutoff] refined around the shoulder of
// 1 - exp(-H exp(-y^2)) at y = sqrt(ln|H|), whose width is ~ 1/(2 sqrt(ln|H|)).
std::vector<double> shoulder_panels(double h)
{
  std::vector<double> edges{0.0, kVelocityCutoff};
  const double centre = std::sqrt(std::log(std::abs(h)));
  const double width = 0.5 / centre;
  for (int k = -4; k <= 4; ++k) {
    const double y = centre + k * width;
    if (y > 0.0 && y < kVelocityCutoff)
      edges.push_back(y);
  }
  std::sort(edges.begin(), edges.end());

  std::vector<double> panels{edges.front()};
  for (std::size_t i = 1; i < edges.size(); ++i) {
    const double a = panels.back();
    const double b = edges[i];
    const int pieces = std::max(1, static_cast<int>(std::ceil(b - a)));
    for (int j = 1; j <= pieces; ++j)
      panels.push_back(a + (b - a) * j / pieces);
  }
  return panels;
}

// (1/sqrt(pi)) int exp(-y^2) g(exp(-y^2)) dy for even integrands; h = K x
// decides which rule resolves the integrand.
template <typename Integrand>
double velocity_average(double h, Integrand g)
{
  if (std::abs(h) <= 1.0) {
    const auto& rule = hermite_rule();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
      const double y = rule.nodes[i];
      sum += rule.weights[i] * g(std::exp(-y * y));
    }
    return sum / std::sqrt(std::numbers::pi);
  }

  const auto& rule = legendre_rule();
  const auto panels = shoulder_panels(h);
  double sum = 0.0;
  for (std::size_t p = 1; p < panels.size(); ++p) {
    const double mid = 0.5 * (panels[p] + panels[p - 1]);
    const double half = 0.5 * (panels[p] - panels[p - 1]);
    double panel = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
      const double y = mid + half * rule.nodes[i];
      const double f = std::exp(-y * y);
      panel += rule.weights[i] * f * g(f);
    }
    sum += half * panel;
  }
  return 2.0 * sum / std::sqrt(std::numbers::pi);
}

void require_non_negative(double k, const char* name)
{
  if (!(k >= 0.0) || !std::isfinite(k))
    throw InvalidArgument(std::string(name) + " must be finite and >= 0");
}

void require_increasing(const Eigen::VectorXd& deltas)
{
  if (deltas.size() == 0)
    throw InvalidArgument("detuning grid is empty");
  for (Eigen::Index i = 1; i < deltas.size(); ++i) {
    if (!(deltas[i] > deltas[i - 1]))
      throw InvalidArgument("detuning grid must be strictly increasing");
  }
}

void normalize(Spectrum& s, Normalization norm, double peak)
{
  s.normalization = norm;
  if (norm == Normalization::Peak) {
    if (peak > 0.0)
      s.values /= peak;
  } else if (norm == Normalization::Area) {
    double area = 0.0;
    for (Eigen::Index i = 1; i < s.values.size(); ++i)
      area += 0.5 * (s.values[i] + s.values[i - 1]) * (s.detunings[i] - s.detunings[i - 1]);
    if (area > 0.0)
      s.values /= area;
  }
}

}  // namespace

double escape_factor(double u)
{
  if (std::abs(u) < kSeriesThreshold)
    return 1.0 - 0.5 * u;
  return -std::expm1(-u) / u;
}

double gamma_spectral_inhom(const PopulationState& s, double k, double delta_over_dw)
{
  require_non_negative(k, "K");
  const double f = std::exp(-0.5 * delta_over_dw * delta_over_dw);
  const double c = k * f;
  return s.aa() * c * escape_factor(c * s.difference());
}

double gamma_avg_inhom(const PopulationState& s, double k)
{
  require_non_negative(k, "K");
  if (k == 0.0 || s.aa() == 0.0)
    return 0.0;
  const double x = s.difference();
  const double avg =
      velocity_average(k * x, [k, x](double f) { return f * escape_factor(k * x * f); });
  return s.aa() * k * avg;
}

double gamma_rad_rhs(const PopulationState& s, const SystemParams& p, double k0,
                     double collective)
{
  const double gab = gamma_ab(p);
  const double c = k_tilde(p, k0) * gab / (gab + collective);
  return p.gamma * s.aa() * c * escape_factor(c * s.difference());
}

double gamma_selfconsistent_rad(const PopulationState& s, const SystemParams& p, double k0)
{
  require_non_negative(k0, "K0");
  if (s.aa() > s.bb() + 1e-9) {
    throw InversionError("radiative trapping rate undefined for inverted populations: rho_aa=" +
                         std::to_string(s.aa()) + " > rho_bb=" + std::to_string(s.bb()));
  }
  if (k0 == 0.0 || s.aa() <= 0.0)
    return 0.0;

  const double gab = gamma_ab(p);
  const double kt = k_tilde(p, k0);
  const double x = s.difference();

  // f(G) = G - g(G) is increasing because g is non-increasing, so [0, g(0)]
  // brackets the unique root.
  double lo = 0.0;
  double hi = gamma_rad_rhs(s, p, k0, 0.0);
  if (hi <= 0.0)
    return 0.0;

  double current = hi;
  for (int it = 0; it < kMaxFixedPointIterations; ++it) {
    const double c = kt * gab / (gab + current);
    const double g = p.gamma * s.aa() * c * escape_factor(c * x);
    const double dg = -p.gamma * s.aa() * std::exp(-c * x) * c / (gab + current);
    const double f = current - g;
    if (f == 0.0)
      return current;
    if (f < 0.0)
      lo = current;
    else
      hi = current;

    double next = current - f / (1.0 - dg);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - current) < 1e-12 * (1.0 + current))
      return next;
    current = next;
  }
  throw NoConvergence("radiative fixed point did not converge in " +
                      std::to_string(kMaxFixedPointIterations) + " iterations");
}

double gamma_spectral_rad(const PopulationState& s, const SystemParams& p, double k0,
                          double gamma_star, double delta)
{
  require_non_negative(k0, "K0");
  const double gab = gamma_ab(p);
  const double width = gab + gamma_star;
  const double c = k_tilde(p, k0) * gab * width / (width * width + delta * delta);
  return p.gamma * s.aa() * c * escape_factor(c * s.difference());
}

double collective_rate(const PopulationState& s, const SystemParams& p)
{
  if (const auto* rad = std::get_if<Radiative>(&p.regime))
    return gamma_selfconsistent_rad(s, p, rad->density);
  return gamma_avg_inhom(s, std::get<Inhomogeneous>(p.regime).density);
}

Spectrum absorption_spectrum(const PopulationState&, const SystemParams& p, double gamma_star,
                             const Eigen::VectorXd& deltas)
{
  require_increasing(deltas);
  const double width = gamma_ab(p) + gamma_star;
  Spectrum out;
  out.detunings = deltas;
  out.values = deltas.unaryExpr(
      [width](double d) { return width * width / (width * width + d * d); });
  out.normalization = Normalization::Peak;
  return out;
}

Spectrum spectral_distribution(const PopulationState& s, const SystemParams& p,
                               const Eigen::VectorXd& deltas, Normalization norm)
{
  require_increasing(deltas);
  const double x = s.difference();

  // The rho_aa prefactor cancels in the normalized shape, so the shape is
  // evaluated without it and stays defined for rho_aa = 0.
  Spectrum out;
  out.detunings = deltas;
  double peak = 0.0;
  if (const auto* rad = std::get_if<Radiative>(&p.regime)) {
    const double gamma_star = gamma_selfconsistent_rad(s, p, rad->density);
    const double gab = gamma_ab(p);
    const double width = gab + gamma_star;
    const double c0 = k_tilde(p, rad->density) * gab / width;
    auto shape = [&](double d) {
      const double lorentz = width * width / (width * width + d * d);
      return lorentz * escape_factor(c0 * lorentz * x);
    };
    out.values = deltas.unaryExpr(shape);
    peak = shape(0.0);
  } else {
    const double k = std::get<Inhomogeneous>(p.regime).density;
    require_non_negative(k, "K");
    auto shape = [&](double d) {
      const double f = std::exp(-0.5 * d * d);
      return f * escape_factor(k * f * x);
    };
    out.values = deltas.unaryExpr(shape);
    peak = shape(0.0);
  }
  normalize(out, norm, peak);
  return out;
}

double full_width_half_max(const Spectrum& spectrum)
{
  const auto& d = spectrum.detunings;
  const auto& v = spectrum.values;
  const Eigen::Index n = v.size();
  if (n < 3)
    throw DegenerateGrid("FWHM needs at least three samples");

  Eigen::Index top = 0;
  v.maxCoeff(&top);
  const double half = 0.5 * v[top];

  Eigen::Index left = top;
  while (left > 0 && v[left] > half)
    --left;
  Eigen::Index right = top;
  while (right < n - 1 && v[right] > half)
    ++right;
  if (v[left] > half || v[right] > half)
    throw DegenerateGrid("spectrum does not fall below half maximum inside the grid");

  auto crossing = [&](Eigen::Index i, Eigen::Index j) {
    return d[i] + (half - v[i]) * (d[j] - d[i]) / (v[j] - v[i]);
  };
  return crossing(right - 1, right) - crossing(left, left + 1);
}

}  // namespace radtrap
