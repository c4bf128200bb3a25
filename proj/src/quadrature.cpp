#include "radtrap/quadrature.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "radtrap/errors.hpp"

namespace radtrap {

namespace {

// Golub-Welsch: the nodes are the eigenvalues of the symmetric Jacobi matrix
// of the three-term recurrence, the weights mu0 * (first eigenvector component)^2.
template <typename OffDiagonal>
QuadratureRule golub_welsch(int n, double mu0, OffDiagonal beta)
{
  if (n < 1)
    throw InvalidArgument("quadrature rule needs at least one node");

  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = beta(k);
    jacobi(k - 1, k) = beta(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success)
    throw NoConvergence("Golub-Welsch eigen decomposition failed");

  QuadratureRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights = mu0 * solver.eigenvectors().row(0).transpose().array().square();

  // Symmetric weight functions: enforce exact node symmetry.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[n - 1 - i] + rule.weights[i]);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1)
    rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int n)
{
  return golub_welsch(n, std::sqrt(std::numbers::pi),
                      [](int k) { return std::sqrt(0.5 * k); });
}

QuadratureRule gauss_legendre(int n)
{
  return golub_welsch(n, 2.0, [](int k) {
    const double kk = k;
    return kk / std::sqrt(4.0 * kk * kk - 1.0);
  });
}

}  // namespace radtrap
