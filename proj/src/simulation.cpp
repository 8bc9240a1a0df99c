#include "compadre/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <thread>

#include "compadre/tuning.hpp"

namespace compadre {

Matrix toeplitz_cov(Index Q, double rho) {
  if (rho < 0.0 || rho >= 1.0) throw Error("toeplitz_cov: need 0 <= rho < 1");
  Matrix cov(Q, Q);
  for (Index a = 0; a < Q; ++a) {
    for (Index b = 0; b < Q; ++b) {
      cov(a, b) = std::pow(rho, std::abs(static_cast<double>(a - b)));
    }
  }
  return cov;
}

Vector eval_function(TrueFunction id, double delta, const Vector& x) {
  switch (id) {
    case TrueFunction::None:
      return Vector::Zero(x.size());
    case TrueFunction::F1:
      return delta * (1.0 - (-2.0 * x.array()).exp());
    case TrueFunction::F2:
      return delta * x.array().square();
    case TrueFunction::F3:
      return delta * x.array().cube();
    case TrueFunction::F4: {
      const double sigma = 0.1;
      const double scale = 1.0 / (std::sqrt(2.0 * M_PI) * sigma);
      return delta * scale *
             (-x.array().square() / (2.0 * sigma * sigma)).exp();
    }
    case TrueFunction::F5:
      return delta * x.array();
  }
  throw Error("eval_function: unknown function id");
}

TrueModel sample_true_model(Index p, Index Q, Philox& rng) {
  if (p < 5 || Q < 5) throw DimensionMismatch("sample_true_model: need p, Q >= 5");
  TrueModel tm;
  tm.p = p;
  tm.Q = Q;
  tm.assignment.assign(static_cast<std::size_t>(p * Q), TrueFunction::None);

  // 4 of the first 5 responses carry signal.
  std::vector<Index> first_five = {0, 1, 2, 3, 4};
  const auto drop = static_cast<Index>(rng.below(5));
  for (const Index q : first_five) {
    if (q != drop) tm.active_responses.push_back(q);
  }

  for (const Index q : tm.active_responses) {
    const auto n_active = static_cast<Index>(1 + rng.below(5));
    // sample n_active distinct covariates
    std::vector<Index> pool(p);
    for (Index j = 0; j < p; ++j) pool[j] = j;
    for (Index i = 0; i < n_active; ++i) {
      const auto pick = i + static_cast<Index>(rng.below(p - i));
      std::swap(pool[i], pool[pick]);
      // f5 with probability 1/2, otherwise f1..f4 equally likely
      const double u = rng.uniform();
      TrueFunction f;
      if (u < 0.5) {
        f = TrueFunction::F5;
      } else {
        f = static_cast<TrueFunction>(1 + static_cast<int>((u - 0.5) / 0.125));
      }
      tm.at(pool[i], q) = f;
    }
  }
  return tm;
}

SimDataset simulate(const SimSetting& s) {
  if (s.n < 2) throw DimensionMismatch("simulate: n too small");
  SimDataset ds;
  Philox rng(s.seed, 0);

  if (s.design == SimDesign::Sparse) {
    ds.truth = sample_true_model(s.p, s.Q, rng);
  } else {
    ds.truth.p = s.p;
    ds.truth.Q = s.Q;
    ds.truth.assignment.assign(static_cast<std::size_t>(s.p * s.Q),
                               TrueFunction::None);
    ds.truth.at(0, 0) = s.shape;
    ds.truth.at(1, 1) = s.shape;
    ds.truth.active_responses = {0, 1};
  }

  ds.X.resize(s.n, s.p);
  for (Index j = 0; j < s.p; ++j) {
    for (Index i = 0; i < s.n; ++i) ds.X(i, j) = rng.uniform(-1.0, 1.0);
  }

  ds.true_f = Matrix::Zero(s.n, s.Q);
  for (Index q = 0; q < s.Q; ++q) {
    for (Index j = 0; j < s.p; ++j) {
      const TrueFunction f = ds.truth.at(j, q);
      if (f != TrueFunction::None) {
        ds.true_f.col(q) += eval_function(f, s.delta, ds.X.col(j));
      }
    }
  }

  // correlated errors: standard normals through the covariance factor
  const Matrix cov = toeplitz_cov(s.Q, s.rho);
  const Matrix chol = Matrix(cov.llt().matrixL());
  Matrix noise(s.n, s.Q);
  for (Index i = 0; i < s.n; ++i) {
    for (Index q = 0; q < s.Q; ++q) noise(i, q) = rng.normal();
  }
  ds.Y = ds.true_f + noise * chol.transpose();
  return ds;
}

Scores score(const EffectLabels& labels, const TrueModel& truth,
             const Matrix& fitted_f, const Matrix& true_f) {
  if (labels.p != truth.p || labels.Q != truth.Q) {
    throw DimensionMismatch("score: label and truth shapes differ");
  }
  if (fitted_f.rows() != true_f.rows() || fitted_f.cols() != true_f.cols()) {
    throw DimensionMismatch("score: fitted and true signal shapes differ");
  }

  Scores sc;
  Index n_signal = 0, n_null = 0, hits = 0, false_alarms = 0;
  for (Index q = 0; q < truth.Q; ++q) {
    for (Index j = 0; j < truth.p; ++j) {
      const bool selected = labels.at(j, q) != EffectType::Null;
      if (truth.is_null(j, q)) {
        ++n_null;
        if (selected) ++false_alarms;
      } else {
        ++n_signal;
        if (selected) ++hits;
      }
    }
  }
  sc.tpr_defined = n_signal > 0;
  sc.tpr = sc.tpr_defined
               ? static_cast<double>(hits) / static_cast<double>(n_signal)
               : 0.0;
  sc.fpr = n_null > 0
               ? static_cast<double>(false_alarms) / static_cast<double>(n_null)
               : 0.0;

  // center the truth per column to match the fitted identifiability constraint
  double abs_sum = 0.0;
  for (Index q = 0; q < true_f.cols(); ++q) {
    const double mean_q = true_f.col(q).mean();
    abs_sum += (fitted_f.col(q).array() - (true_f.col(q).array() - mean_q))
                   .abs()
                   .sum();
  }
  sc.mad = abs_sum / static_cast<double>(true_f.rows() * true_f.cols());
  return sc;
}

// ---------------------------------------------------------------------------
// benchmark runner
// ---------------------------------------------------------------------------

std::string method_name(Method m) {
  switch (m) {
    case Method::CoMPAdRe: return "compadre";
    case Method::PAdRe: return "padre";
    case Method::Lasso: return "lasso";
  }
  return "unknown";
}

namespace {

Scores lasso_baseline(const SimDataset& data, const FitConfig& config) {
  const Index n = data.X.rows(), p = data.X.cols(), q = data.Y.cols();
  Matrix z(n, p);
  for (Index j = 0; j < p; ++j) z.col(j) = standardize(data.X.col(j)).z;

  EffectLabels labels(p, q);
  Matrix signal = Matrix::Zero(n, q);
  const auto folds = make_folds(n, config.folds, config.seed);
  std::vector<std::vector<Index>> train(config.folds), test(config.folds);
  for (Index i = 0; i < n; ++i) {
    for (int f = 0; f < config.folds; ++f) {
      (folds[i] == f ? test[f] : train[f]).push_back(i);
    }
  }

  for (Index c = 0; c < q; ++c) {
    const Vector y = data.Y.col(c);
    LassoProblem full(z, y);
    const LambdaPath path = make_path(full.lambda_max(), PathKind::Linear,
                                      config.path_length, config.path_min_ratio);
    const CVRecord rec = cv_select(
        [&](int f) {
          Matrix ztr(train[f].size(), p), zte(test[f].size(), p);
          Vector ytr(train[f].size()), yte(test[f].size());
          for (std::size_t i = 0; i < train[f].size(); ++i) {
            ztr.row(i) = z.row(train[f][i]);
            ytr[i] = y[train[f][i]];
          }
          for (std::size_t i = 0; i < test[f].size(); ++i) {
            zte.row(i) = z.row(test[f][i]);
            yte[i] = y[test[f][i]];
          }
          LassoProblem prob(ztr, ytr);
          std::vector<double> errs(path.values.size());
          Vector warm = Vector::Zero(p);
          for (std::size_t li = 0; li < path.values.size(); ++li) {
            const LassoFit fit = prob.solve(path.values[li], config.solver, &warm);
            warm = fit.coefs;
            errs[li] = (yte.array() - fit.intercept - (zte * fit.coefs).array())
                           .square()
                           .mean();
          }
          return errs;
        },
        path, config.folds);
    const LassoFit fit = full.solve(rec.chosen_lambda(), config.solver);

    // re-estimate the selected coefficients, as is standard practice
    if (!fit.active_set.empty()) {
      Matrix z_act(n, static_cast<Index>(fit.active_set.size()));
      for (std::size_t a = 0; a < fit.active_set.size(); ++a) {
        z_act.col(a) = z.col(fit.active_set[a]);
      }
      const OlsFit ols = ols_refit(z_act, y.array() - y.mean());
      for (std::size_t a = 0; a < fit.active_set.size(); ++a) {
        if (ols.coefs[a] != 0.0) {
          labels.at(fit.active_set[a], c) = EffectType::Linear;
          signal.col(c) += z.col(fit.active_set[a]) * ols.coefs[a];
        }
      }
    }
  }
  return score(labels, data.truth, signal, data.true_f);
}

}  // namespace

Scores evaluate_method(const SimDataset& data, Method method,
                       const FitConfig& config) {
  if (method == Method::Lasso) return lasso_baseline(data, config);
  FitConfig cfg = config;
  cfg.mode = (method == Method::CoMPAdRe) ? FitMode::CoMPAdRe : FitMode::PAdRe;
  const FitReport rep = fit(data.Y, data.X, cfg);
  Matrix signal = rep.fitted;
  for (Index q = 0; q < signal.cols(); ++q) {
    signal.col(q).array() -= rep.state.intercepts[q];
  }
  return score(rep.labels, data.truth, signal, data.true_f);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double iqr_of(std::vector<double> values) {
  if (values.size() < 2) return 0.0;
  const Vector v = Eigen::Map<const Vector>(values.data(), values.size());
  return quantile(v, 0.75) - quantile(v, 0.25);
}

std::vector<CellResult> run_cell(const SimSetting& base, int reps,
                                 const std::vector<Method>& methods,
                                 const FitConfig& config, int threads) {
  std::vector<std::vector<Scores>> slots(reps);
  const auto run_replicate = [&](int r) {
    SimSetting s = base;
    s.seed = base.seed + static_cast<std::uint64_t>(r);
    const SimDataset data = simulate(s);
    FitConfig cfg = config;
    cfg.seed = s.seed;
    std::vector<Scores> per_method;
    per_method.reserve(methods.size());
    for (const Method m : methods) {
      per_method.push_back(evaluate_method(data, m, cfg));
    }
    slots[r] = std::move(per_method);
  };

  if (threads <= 1) {
    for (int r = 0; r < reps; ++r) run_replicate(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
          run_replicate(r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<CellResult> cells(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    CellResult& cell = cells[m];
    cell.method = methods[m];
    std::vector<double> tpr, fpr, mad;
    for (int r = 0; r < reps; ++r) {
      cell.replicates.push_back(slots[r][m]);
      if (slots[r][m].tpr_defined) tpr.push_back(slots[r][m].tpr);
      fpr.push_back(slots[r][m].fpr);
      mad.push_back(slots[r][m].mad);
    }
    cell.median_tpr = median_of(tpr);
    cell.iqr_tpr = iqr_of(tpr);
    cell.median_fpr = median_of(fpr);
    cell.iqr_fpr = iqr_of(fpr);
    cell.median_mad = median_of(mad);
    cell.iqr_mad = iqr_of(mad);
  }
  return cells;
}

double mad_ratio(const CellResult& a, const CellResult& b) {
  std::vector<double> ratios;
  for (std::size_t r = 0; r < a.replicates.size(); ++r) {
    ratios.push_back(a.replicates[r].mad / b.replicates[r].mad);
  }
  return median_of(ratios);
}

}  // namespace compadre
