#pragma once

#include <vector>

#include "compadre/types.hpp"

namespace compadre {

struct SolverOptions {
  double tol = 1e-6;  // stationarity tolerance
  int max_sweeps_lasso = 10000;
  int max_sweeps_group = 5000;
  int max_sweeps_glasso = 500;
};

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------

struct LassoFit {
  Vector coefs;
  double intercept = 0.0;
  double lambda1 = 0.0;
  std::vector<int> active_set;
  bool converged = true;
  int sweeps = 0;
};

/// Caches the centered design for repeated solves along a lambda path.
class LassoProblem {
 public:
  LassoProblem(Matrix X, Vector y);

  /// max_j |X_j^T y| / n on the centered data: smallest lambda with an
  /// all-zero solution.
  double lambda_max() const;

  LassoFit solve(double lambda1, const SolverOptions& opts = {},
                 const Vector* warm_start = nullptr) const;

  double intercept_for(const Vector& coefs) const;
  Index n() const { return xc_.rows(); }
  Index p() const { return xc_.cols(); }

 private:
  Matrix xc_;       // column-centered design
  Vector yc_;       // centered response
  Vector col_mean_;
  Vector col_sq_;   // (1/n) ||X_j||^2 after centering
  double y_mean_ = 0.0;
};

/// Cyclic coordinate descent for (1/2n)||y - b0 - X beta||^2 + lambda1 |beta|_1.
LassoFit lasso(const Matrix& X, const Vector& y, double lambda1,
               const SolverOptions& opts = {},
               const Vector* warm_start = nullptr);

// ---------------------------------------------------------------------------
// OLS refit
// ---------------------------------------------------------------------------

struct OlsFit {
  Vector coefs;
  std::vector<int> dropped;  // collinear columns removed (coef forced to 0)
};

/// Least squares with collinear columns dropped at relative tolerance 1e-10
/// on the pivoted R diagonal.
OlsFit ols_refit(const Matrix& X_sel, const Vector& y);

// ---------------------------------------------------------------------------
// Smoothness-augmented group lasso
// ---------------------------------------------------------------------------

struct GroupSpec {
  Matrix design;       // n x m nonlinear block
  Vector gamma;        // m positive smoothness weights
  double lambda3 = 0;  // per-block smoothness level
};

enum class GroupFactor { Cholesky, SymmetricSqrt };

struct GroupLassoFit {
  std::vector<Vector> blocks;  // coefficients per group; zero when inactive
  double lambda2 = 0.0;
  std::vector<int> active_groups;
  bool converged = true;
  int sweeps = 0;
};

/// Block coordinate descent on the reparameterized problem
///   (1/2n)||y - sum_j U_j b_j||^2 + lambda2 sum_j sqrt(b_j^T M_j b_j),
/// M_j = (1/n)U_j^T U_j + lambda3_j Gamma_j = R_j^T R_j. Each block update
/// solves the scalar secular equation for ||theta_j|| exactly.
class GroupLassoProblem {
 public:
  explicit GroupLassoProblem(std::vector<GroupSpec> groups,
                             GroupFactor factor = GroupFactor::Cholesky);

  double lambda_max(const Vector& y) const;
  GroupLassoFit solve(const Vector& y, double lambda2,
                      const SolverOptions& opts = {},
                      const GroupLassoFit* warm_start = nullptr) const;

  Index n_groups() const { return static_cast<Index>(blocks_.size()); }
  Index n() const { return n_; }
  Index block_size(Index j) const { return blocks_[j].r.cols(); }

 private:
  struct Block {
    Matrix a;     // n x m: U R^{-1}
    Matrix r;     // m x m factor of M
    Matrix rinv;  // m x m
    Matrix p;     // eigenvectors of (1/n) A^T A
    Vector d;     // eigenvalues of (1/n) A^T A
  };
  std::vector<Block> blocks_;
  Index n_ = 0;
};

GroupLassoFit group_lasso_smooth(const std::vector<GroupSpec>& groups,
                                 const Vector& y, double lambda2,
                                 const SolverOptions& opts = {},
                                 GroupFactor factor = GroupFactor::Cholesky,
                                 const GroupLassoFit* warm_start = nullptr);

// ---------------------------------------------------------------------------
// Graphical lasso
// ---------------------------------------------------------------------------

struct PrecisionEstimate {
  Matrix precision;
  double lambda4 = 0.0;
  bool jittered = false;  // ridge jitter applied to a singular S at lambda4=0
  bool converged = true;
  int sweeps = 0;
};

/// L1-penalized precision estimation (off-diagonal penalty only), by
/// column-wise lasso sweeps with duality-gap stopping.
PrecisionEstimate graphical_lasso(const Matrix& S, double lambda4,
                                  const SolverOptions& opts = {},
                                  const PrecisionEstimate* warm_start = nullptr);

/// Regression view of one response's errors on the others:
/// alpha_q = -precision[-q, q] / precision[q, q].
struct AlphaView {
  Vector alpha;     // Q-1 coefficients, in response order with q removed
  double sigma_qq;  // residual precision of response q
};
AlphaView alpha_from_precision(const Matrix& precision, Index q);

// ---------------------------------------------------------------------------
// Mixed-model (penalized least squares) refit
// ---------------------------------------------------------------------------

struct MixedModelFit {
  Vector linear_coefs;
  std::vector<Vector> nonlinear_coefs;
  double noise_var = 0.0;
  std::vector<int> dropped;  // collinear linear columns removed
};

/// Penalized least squares
///   min ||y - X a - sum_j U_j b_j||^2 + sum_j lambda3_j b_j^T Gamma_j b_j,
/// the BLUP at fixed variance ratios; noise_var = RSS / (n - effective df).
MixedModelFit mixed_model_refit(const Matrix& X_sel,
                                const std::vector<GroupSpec>& blocks,
                                const Vector& y);

}  // namespace compadre
