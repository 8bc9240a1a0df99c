// Independent reference computations used to freeze expected test values.
// Everything here is deliberately brute force and shares no code with the
// library paths it checks.
#pragma once

#include <cmath>
#include <vector>

#include "compadre/rng.hpp"
#include "compadre/spline_basis.hpp"
#include "compadre/types.hpp"

namespace oracle {

using compadre::Index;
using compadre::Matrix;
using compadre::Vector;

/// Dense penalized-spline smoother: Phi (Phi^T Phi + lambda Omega)^{-1} Phi^T y.
inline Vector direct_spline_smoother(const Matrix& phi, const Matrix& omega,
                                     double lambda, const Vector& y) {
  const Matrix a = phi.transpose() * phi + lambda * omega;
  return phi * a.ldlt().solve(phi.transpose() * y);
}

/// Composite-Simpson quadrature of the squared second derivative of a spline
/// with coefficients beta, integrating each knot interval separately.
inline double quadrature_penalty(const Vector& beta, const compadre::KnotSet& ks,
                                 int panels_per_interval = 64) {
  std::vector<double> edges;
  edges.push_back(ks.lo);
  for (Index i = 0; i < ks.interior.size(); ++i) edges.push_back(ks.interior[i]);
  edges.push_back(ks.hi);

  double total = 0.0;
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    const double a = edges[e], b = edges[e + 1];
    const int m = 2 * panels_per_interval;  // Simpson needs an even count
    const double h = (b - a) / m;
    Vector grid(m + 1);
    for (int i = 0; i <= m; ++i) grid[i] = a + h * i;
    const Matrix d2 = compadre::bspline_design(grid, ks, 2);
    const Vector f2 = d2 * beta;
    double s = f2[0] * f2[0] + f2[m] * f2[m];
    for (int i = 1; i < m; ++i) {
      s += (i % 2 == 1 ? 4.0 : 2.0) * f2[i] * f2[i];
    }
    total += s * h / 3.0;
  }
  return total;
}

/// OLS through the normal equations.
inline Vector normal_equations(const Matrix& x, const Vector& y) {
  return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

inline double soft(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Proximal-gradient (ISTA) solve of the group-lasso objective
///   (1/2n)||y - sum_j U_j b_j||^2 + lambda2 sum_j sqrt(b_j^T M_j b_j),
/// M_j = (1/n)U_j^T U_j + lambda3_j Gamma_j. Slow but independent.
struct IstaGroup {
  Matrix design;  // n x m
  Matrix m;       // m x m block metric
};

inline std::vector<Vector> ista_group_lasso(const std::vector<IstaGroup>& groups,
                                            const Vector& y, double lambda2,
                                            int iters = 200000) {
  const auto n = static_cast<double>(y.size());
  std::vector<Vector> beta;
  std::vector<Matrix> half, half_inv;  // symmetric square roots of M_j
  Index total = 0;
  for (const auto& g : groups) {
    beta.push_back(Vector::Zero(g.design.cols()));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.m);
    const Vector s = eig.eigenvalues().cwiseSqrt();
    half.push_back(eig.eigenvectors() * s.asDiagonal() *
                   eig.eigenvectors().transpose());
    half_inv.push_back(eig.eigenvectors() * s.cwiseInverse().asDiagonal() *
                       eig.eigenvectors().transpose());
    total += g.design.cols();
  }
  // Lipschitz bound for the quadratic part in the theta parameterization
  double lip = 0.0;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const Matrix a = groups[j].design * half_inv[j];
    lip += (a.transpose() * a / n).operatorNorm();
  }
  const double step = 1.0 / lip;

  std::vector<Vector> theta;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    theta.push_back(Vector::Zero(groups[j].design.cols()));
  }
  for (int it = 0; it < iters; ++it) {
    Vector r = y;
    for (std::size_t j = 0; j < groups.size(); ++j) {
      r -= groups[j].design * (half_inv[j] * theta[j]);
    }
    double move = 0.0;
    for (std::size_t j = 0; j < groups.size(); ++j) {
      const Vector grad = -(half_inv[j] * (groups[j].design.transpose() * r)) / n;
      Vector cand = theta[j] - step * grad;
      const double norm = cand.norm();
      const double shrink = std::max(0.0, 1.0 - step * lambda2 / std::max(norm, 1e-300));
      cand *= shrink;
      move = std::max(move, (cand - theta[j]).lpNorm<Eigen::Infinity>());
      theta[j] = cand;
    }
    if (move < 1e-12) break;
  }
  for (std::size_t j = 0; j < groups.size(); ++j) {
    beta[j] = half_inv[j] * theta[j];
  }
  return beta;
}

inline double group_objective(const std::vector<IstaGroup>& groups,
                              const Vector& y, double lambda2,
                              const std::vector<Vector>& beta) {
  const auto n = static_cast<double>(y.size());
  Vector r = y;
  for (std::size_t j = 0; j < groups.size(); ++j) r -= groups[j].design * beta[j];
  double obj = r.squaredNorm() / (2.0 * n);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    obj += lambda2 * std::sqrt(beta[j].dot(groups[j].m * beta[j]));
  }
  return obj;
}

/// Dense augmented normal equations for the penalized (mixed-model) refit.
inline Vector augmented_solve(const Matrix& design, const Matrix& penalty,
                              const Vector& y) {
  return (design.transpose() * design + penalty)
      .ldlt()
      .solve(design.transpose() * y);
}

}  // namespace oracle
