#include "radtrap/model.hpp"

#include <string>

namespace radtrap {

namespace {

void require_rate(double v, const char* name)
{
  if (!std::isfinite(v) || v < 0.0)
    throw InvalidArgument(std::string(name) + " must be finite and >= 0, got " +
                          std::to_string(v));
}

}  // namespace

void validate(const SystemParams& p)
{
  if (p.gamma != 1.0)
    throw InvalidArgument("gamma must be exactly 1 (all rates are in units of gamma)");
  require_rate(p.gamma_prime, "gamma_prime");
  require_rate(p.gamma0, "gamma0");
  require_rate(p.pump_rate, "pump_rate");
  if (const auto* inh = std::get_if<Inhomogeneous>(&p.regime)) {
    require_rate(inh->density, "K");
    if (!(inh->doppler_width > 0.0) || !std::isfinite(inh->doppler_width))
      throw InvalidArgument("doppler_width must be finite and > 0");
  } else {
    require_rate(std::get<Radiative>(p.regime).density, "K0");
  }
}

void validate(const PopulationState& s, double tol)
{
  if (!s.is_valid(tol)) {
    throw InvalidArgument("invalid population state (" + std::to_string(s.aa()) + ", " +
                          std::to_string(s.bb()) + ", " + std::to_string(s.cc()) + ")");
  }
}

}  // namespace radtrap
