#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "compadre/solvers.hpp"
#include "compadre/spline_basis.hpp"
#include "compadre/tuning.hpp"
#include "compadre/types.hpp"

namespace compadre {

enum class EffectType : std::uint8_t { Null = 0, Linear = 1, Nonlinear = 2 };

/// Null / Linear / Nonlinear classification per (covariate, response) pair.
struct EffectLabels {
  Index p = 0, Q = 0;
  std::vector<EffectType> cells;  // column-major: cells[j + q*p]

  EffectLabels() = default;
  EffectLabels(Index p_, Index q_)
      : p(p_), Q(q_), cells(static_cast<std::size_t>(p_ * q_), EffectType::Null) {}
  EffectType& at(Index j, Index q) { return cells[j + q * p]; }
  EffectType at(Index j, Index q) const { return cells[j + q * p]; }
};

enum class FitMode { CoMPAdRe, PAdRe };

struct FitConfig {
  FitMode mode = FitMode::CoMPAdRe;
  int max_iters = 5;
  double tol = 1e-4;  // on the change in MSE
  int folds = 5;
  int n_interior_knots = 9;
  int path_length = 50;
  double path_min_ratio = 1e-3;
  std::uint64_t seed = 1;
  bool reselect_each_iter = true;
  std::optional<Vector> lambda1;  // fixed per-response values; empty = CV
  std::optional<Vector> lambda2;
  std::optional<double> lambda4;
  std::vector<double> gcv_grid = default_gcv_grid();
  SolverOptions solver;
};

/// All mean-model coefficients plus the response precision at one iteration.
struct ModelState {
  Matrix beta_lin;                           // p x Q
  std::vector<std::vector<Vector>> beta_nl;  // [j][q], length k_j - 2
  Vector intercepts;                         // Q
  PrecisionEstimate precision;               // Q x Q
  Matrix lambda3;                            // p x Q smoothness levels

  Index p() const { return beta_lin.rows(); }
  Index Q() const { return beta_lin.cols(); }
};

struct ResponseTuning {
  std::vector<double> lambda1_by_iter;
  std::vector<double> lambda2_by_iter;
  CVRecord cv_lambda1;  // last selection performed
  CVRecord cv_lambda2;
};

struct FitReport {
  ModelState state;
  EffectLabels labels;
  Matrix fitted;  // n x Q, includes intercepts
  std::vector<double> mse_trace;
  std::vector<double> objective_trace;
  bool converged = false;
  int iterations = 0;
  std::vector<ResponseTuning> tuning;    // per response
  std::vector<double> lambda4_by_iter;
  std::vector<double> lambda1_used;      // final per-response values
  std::vector<double> lambda2_used;
  std::vector<DRBasis> bases;            // per covariate
  FitMode mode = FitMode::CoMPAdRe;
};

/// Step-1 working response: y_q minus its own nonlinear fit and the
/// regression of the other responses' residuals.
Vector residual_target_linear(Index q, const ModelState& state, const Matrix& Y,
                              const Matrix& Z, const std::vector<DRBasis>& bases);

/// Step-2 working response: y_q minus its own intercept+linear fit and the
/// cross-response residual regression.
Vector residual_target_nonlinear(Index q, const ModelState& state,
                                 const Matrix& Y, const Matrix& Z,
                                 const std::vector<DRBasis>& bases);

/// Step-2.5 working response: y_q minus the cross-response residual
/// regression only.
Vector residual_target_refit(Index q, const ModelState& state, const Matrix& Y,
                             const Matrix& Z, const std::vector<DRBasis>& bases);

struct ObjectiveLambdas {
  Vector lambda1;  // Q
  Vector lambda2;  // Q
  double lambda4 = 0.0;
};

/// Penalized negative log-likelihood of the full multivariate objective.
double objective(const ModelState& state, const Matrix& Y, const Matrix& Z,
                 const std::vector<DRBasis>& bases, const ObjectiveLambdas& lambdas);

EffectLabels classify(const ModelState& state);

/// Fitted values (intercept + linear + nonlinear) on the training design.
Matrix fitted_values(const ModelState& state, const Matrix& Z,
                     const std::vector<DRBasis>& bases);

FitReport fit(const Matrix& Y, const Matrix& X, const FitConfig& config = {});

/// Predictions for new covariate rows on the original scale of X.
Matrix predict(const FitReport& report, const Matrix& X_new);

}  // namespace compadre
