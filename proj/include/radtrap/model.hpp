#pragma once

#include <cmath>
#include <numbers>
#include <variant>

#include <Eigen/Core>

#include "radtrap/errors.hpp"

namespace radtrap {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

/// Doppler-broadened medium. `density` is K = g N lambda^2 d_eff with
/// g = gamma / (sqrt(2 pi) Delta_D).
struct Inhomogeneous
{
  double doppler_width = 100.0;  // Delta_D / gamma
  double density = 0.0;          // K
};

/// Purely radiatively broadened medium. `density` is K0 = N lambda^2 d_eff / 2 pi.
struct Radiative
{
  double density = 0.0;  // K0
};

using Regime = std::variant<Inhomogeneous, Radiative>;

/// Rates of the driven Lambda system, all in units of gamma (a -> b decay).
template <typename Scalar>
struct BasicSystemParams
{
  Scalar gamma = 1;        // fixed normalization
  Scalar gamma_prime = 1;  // a -> c decay
  Scalar gamma0 = 0;       // b <-> c exchange
  Scalar pump_rate = 10;   // broad-band pump R on c <-> a
  Regime regime = Inhomogeneous{};
};

using SystemParams = BasicSystemParams<double>;

/// Occupation probabilities (rho_aa, rho_bb, rho_cc). rho_bb is carried
/// explicitly so that trace drift stays observable.
template <typename Scalar>
class BasicPopulationState
{
 public:
  using Vector = Vector3<Scalar>;

  BasicPopulationState() : rho_(Scalar(0), Scalar(1), Scalar(0)) {}
  BasicPopulationState(Scalar aa, Scalar bb, Scalar cc) : rho_(aa, bb, cc) {}
  explicit BasicPopulationState(const Vector& rho) : rho_(rho) {}

  Scalar aa() const { return rho_[0]; }
  Scalar bb() const { return rho_[1]; }
  Scalar cc() const { return rho_[2]; }

  const Vector& vector() const { return rho_; }

  Scalar trace() const { return rho_.sum(); }
  /// rho_bb - rho_aa, the population difference entering the trapping rate.
  Scalar difference() const { return rho_[1] - rho_[0]; }
  /// rho_aa + rho_cc, the population still to be pumped.
  Scalar pumped() const { return rho_[0] + rho_[2]; }

  bool is_valid(Scalar tol = Scalar(1e-9)) const
  {
    using std::abs;
    for (int i = 0; i < 3; ++i) {
      if (!(rho_[i] >= -tol && rho_[i] <= 1 + tol))
        return false;
    }
    return abs(trace() - 1) <= tol;
  }

 private:
  Vector rho_;
};

using PopulationState = BasicPopulationState<double>;

/// Coherence decay rate of the a-b transition, (gamma + gamma' + R + gamma0) / 2.
template <typename Scalar>
Scalar gamma_ab(const BasicSystemParams<Scalar>& p)
{
  return (p.gamma + p.gamma_prime + p.pump_rate + p.gamma0) / 2;
}

/// Right-hand side of the broad-band pumping rate equations for a given
/// collective rate `collective` on the a <-> b transition. The bb component
/// is the negated sum of the other two, so the components sum to zero.
template <typename Scalar>
Vector3<Scalar> rate_rhs(const BasicPopulationState<Scalar>& s,
                         const BasicSystemParams<Scalar>& p,
                         Scalar collective)
{
  const Scalar pump = p.pump_rate * (s.aa() - s.cc());
  const Scalar daa = -(p.gamma + p.gamma_prime + collective) * s.aa() +
                     collective * s.bb() - pump;
  const Scalar dcc = p.gamma_prime * s.aa() + p.gamma0 * s.bb() -
                     p.gamma0 * s.cc() + pump;
  return Vector3<Scalar>(daa, -(daa + dcc), dcc);
}

/// K for Inhomogeneous, K0 for Radiative.
inline double density_param(const Regime& r)
{
  return std::visit([](const auto& v) { return v.density; }, r);
}

inline bool is_radiative(const Regime& r)
{
  return std::holds_alternative<Radiative>(r);
}

template <typename Scalar>
BasicSystemParams<Scalar> with_density(BasicSystemParams<Scalar> p, double density)
{
  std::visit([density](auto& v) { v.density = density; }, p.regime);
  return p;
}

/// K-tilde = K0 gamma / gamma_ab, the effective radiative density parameter.
inline double k_tilde(const SystemParams& p, double k0)
{
  return k0 * p.gamma / gamma_ab(p);
}

/// K from the composite N lambda^2 d_eff and the Doppler width Delta_D/gamma.
inline double density_param_inhom(double n_lambda2_deff, double doppler_width)
{
  return n_lambda2_deff / (std::sqrt(2 * std::numbers::pi) * doppler_width);
}

/// K0 from the composite N lambda^2 d_eff.
inline double density_param_rad(double n_lambda2_deff)
{
  return n_lambda2_deff / (2 * std::numbers::pi);
}

/// Throws InvalidArgument if any rate is negative or non-finite, gamma != 1,
/// or the regime parameters are out of range.
void validate(const SystemParams& p);

/// Throws InvalidArgument unless the state satisfies the population invariants.
void validate(const PopulationState& s, double tol = 1e-9);

}  // namespace radtrap
