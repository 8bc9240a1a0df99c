#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "compadre/solvers.hpp"
#include "compadre/types.hpp"

namespace compadre {

enum class PathKind { Linear, Group, Precision };

struct LambdaPath {
  std::vector<double> values;  // strictly decreasing, values[0] = lambda_max
  PathKind kind = PathKind::Linear;
};

/// Log-spaced path from lambda_max down to min_ratio * lambda_max.
LambdaPath make_path(double lambda_max, PathKind kind, int length = 50,
                     double min_ratio = 1e-3);

/// Smallest lambda1 with an all-zero lasso solution: max_j |X_j^T y| / n
/// (computed on centered data).
double lambda_max_linear(const Matrix& X, const Vector& y);

/// Group-lasso null threshold under the block reparameterization.
double lambda_max_group(const GroupLassoProblem& problem, const Vector& y);

/// For p >= 100 the group path is kept no lower than 0.75 * lambda_max.
LambdaPath guard_lambda2_range(LambdaPath path, Index p);

/// Contiguous-block fold assignment; a pure function of (n, K, seed).
std::vector<int> make_folds(Index n, int K, std::uint64_t seed);

struct CVRecord {
  std::vector<double> lambdas;
  std::vector<double> mean_error;
  std::vector<double> std_error;
  int min_index = 0;
  int chosen = 0;  // sparsest lambda within one SE of the minimum
  double chosen_lambda() const { return lambdas[chosen]; }
};

/// K-fold cross-validation with the one-standard-error rule applied toward
/// sparsity. `fold_errors(f)` returns the held-out error of fold f at every
/// path value (so callers can warm-start along the path).
CVRecord cv_select(const std::function<std::vector<double>(int fold)>& fold_errors,
                   const LambdaPath& path, int K);

}  // namespace compadre
