#pragma once

#include <cstdint>
#include <vector>

#include "compadre/core.hpp"
#include "compadre/rng.hpp"
#include "compadre/types.hpp"

namespace compadre {

enum class TrueFunction : int {
  None = 0,
  F1 = 1,  // delta * (1 - exp(-2x))
  F2 = 2,  // delta * x^2
  F3 = 3,  // delta * x^3
  F4 = 4,  // delta * dnorm-style spike, sigma = 0.1
  F5 = 5,  // delta * x
};

enum class SimDesign {
  Sparse,        // 4 of the first 5 responses active, 1-5 covariates each
  TwoPairShape,  // (y1,x1) and (y2,x2) share one functional shape
};

struct SimSetting {
  Index n = 250;
  Index p = 10;
  Index Q = 10;
  double rho = 0.9;
  double delta = 0.25;
  std::uint64_t seed = 1;
  SimDesign design = SimDesign::Sparse;
  TrueFunction shape = TrueFunction::F1;  // TwoPairShape only
};

/// Error covariance (rho^|a-b|); positive definite for 0 <= rho < 1.
Matrix toeplitz_cov(Index Q, double rho);

Vector eval_function(TrueFunction id, double delta, const Vector& x);

struct TrueModel {
  Index p = 0, Q = 0;
  std::vector<TrueFunction> assignment;  // column-major (j, q)
  std::vector<Index> active_responses;

  TrueFunction at(Index j, Index q) const { return assignment[j + q * p]; }
  TrueFunction& at(Index j, Index q) { return assignment[j + q * p]; }
  bool is_null(Index j, Index q) const { return at(j, q) == TrueFunction::None; }
};

TrueModel sample_true_model(Index p, Index Q, Philox& rng);

struct SimDataset {
  Matrix X;       // n x p, Unif(-1,1)
  Matrix Y;       // n x Q
  Matrix true_f;  // n x Q signal (no noise)
  TrueModel truth;
};

SimDataset simulate(const SimSetting& setting);

struct Scores {
  double tpr = 0.0;
  bool tpr_defined = false;  // false when the truth has no non-null pair
  double fpr = 0.0;
  double mad = 0.0;
};

/// Selection (null vs non-null) and estimation scores. fitted_f is the fitted
/// signal (intercept removed); the truth is centered per response column to
/// match the fitted identifiability constraint.
Scores score(const EffectLabels& labels, const TrueModel& truth,
             const Matrix& fitted_f, const Matrix& true_f);

enum class Method { CoMPAdRe, PAdRe, Lasso };

std::string method_name(Method m);

/// Fit one method to a simulated dataset and score it against the truth.
/// Lasso is the internal linear baseline: marginal 1-SE CV per response with
/// an OLS re-estimate of the selected coefficients.
Scores evaluate_method(const SimDataset& data, Method method,
                       const FitConfig& config);

struct CellResult {
  Method method = Method::CoMPAdRe;
  std::vector<Scores> replicates;
  double median_tpr = 0.0, iqr_tpr = 0.0;
  double median_fpr = 0.0, iqr_fpr = 0.0;
  double median_mad = 0.0, iqr_mad = 0.0;
};

double median_of(std::vector<double> values);
double iqr_of(std::vector<double> values);

/// Runs `reps` replicates of one simulation cell for each method; replicate
/// r uses seed base.seed + r. Replicates may run on several threads; results
/// are identical for any thread count.
std::vector<CellResult> run_cell(const SimSetting& base, int reps,
                                 const std::vector<Method>& methods,
                                 const FitConfig& config, int threads = 1);

/// Median over replicates of the ratio mad(a) / mad(b).
double mad_ratio(const CellResult& a, const CellResult& b);

}  // namespace compadre
