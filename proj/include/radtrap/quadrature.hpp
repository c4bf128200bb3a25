#pragma once

#include <Eigen/Core>

namespace radtrap {

/// Nodes and weights of a fixed interpolatory rule.
struct QuadratureRule
{
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Gauss-Hermite rule for int exp(-y^2) f(y) dy over the real line.
QuadratureRule gauss_hermite(int n);

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

}  // namespace radtrap
