#include "compadre/tuning.hpp"

#include <algorithm>
#include <cmath>

namespace compadre {

LambdaPath make_path(double lambda_max, PathKind kind, int length,
                     double min_ratio) {
  LambdaPath path;
  path.kind = kind;
  if (!(lambda_max > 0.0) || length <= 1) {
    path.values = {std::max(lambda_max, 0.0)};
    return path;
  }
  path.values.resize(length);
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(lambda_max * min_ratio);
  for (int i = 0; i < length; ++i) {
    path.values[i] = std::exp(log_max + (log_min - log_max) *
                                            static_cast<double>(i) /
                                            static_cast<double>(length - 1));
  }
  path.values.front() = lambda_max;
  return path;
}

double lambda_max_linear(const Matrix& X, const Vector& y) {
  return LassoProblem(X, y).lambda_max();
}

double lambda_max_group(const GroupLassoProblem& problem, const Vector& y) {
  return problem.lambda_max(y);
}

LambdaPath guard_lambda2_range(LambdaPath path, Index p) {
  if (p < 100 || path.values.empty()) return path;
  const double floor = 0.75 * path.values.front();
  std::erase_if(path.values, [floor](double v) { return v < floor; });
  return path;
}

std::vector<int> make_folds(Index n, int K, std::uint64_t seed) {
  // splitmix64 of the seed picks a cyclic shift; folds are contiguous blocks
  // in the shifted order.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  const auto shift = static_cast<Index>(z % static_cast<std::uint64_t>(n));
  std::vector<int> fold(n);
  for (Index i = 0; i < n; ++i) {
    const Index pos = (i + shift) % n;
    fold[i] = static_cast<int>((pos * K) / n);
  }
  return fold;
}

CVRecord cv_select(const std::function<std::vector<double>(int fold)>& fold_errors,
                   const LambdaPath& path, int K) {
  const auto L = path.values.size();
  CVRecord rec;
  rec.lambdas = path.values;
  rec.mean_error.assign(L, 0.0);
  rec.std_error.assign(L, 0.0);

  std::vector<std::vector<double>> err(K);
  for (int f = 0; f < K; ++f) {
    err[f] = fold_errors(f);
    if (err[f].size() != L) throw Error("cv_select: fold error length mismatch");
    for (std::size_t i = 0; i < L; ++i) rec.mean_error[i] += err[f][i];
  }
  for (std::size_t i = 0; i < L; ++i) rec.mean_error[i] /= K;
  for (std::size_t i = 0; i < L; ++i) {
    double ss = 0.0;
    for (int f = 0; f < K; ++f) {
      const double d = err[f][i] - rec.mean_error[i];
      ss += d * d;
    }
    const double var = (K > 1) ? ss / (K - 1) : 0.0;
    rec.std_error[i] = std::sqrt(var / K);
  }

  rec.min_index = 0;
  for (std::size_t i = 1; i < L; ++i) {
    if (rec.mean_error[i] < rec.mean_error[rec.min_index]) {
      rec.min_index = static_cast<int>(i);
    }
  }
  // 1-SE rule: largest lambda (path is decreasing, so smallest index) whose
  // mean error is within one standard error of the minimum.
  const double cutoff =
      rec.mean_error[rec.min_index] + rec.std_error[rec.min_index];
  rec.chosen = rec.min_index;
  for (std::size_t i = 0; i < L; ++i) {
    if (rec.mean_error[i] <= cutoff) {
      rec.chosen = static_cast<int>(i);
      break;
    }
  }
  return rec;
}

}  // namespace compadre
