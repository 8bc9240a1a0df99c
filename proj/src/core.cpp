#include "compadre/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace compadre {

namespace {

Matrix rows_of(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

Vector entries_of(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

Vector cross_adjustment(Index q, const Matrix& resid, const Vector& alpha) {
  Vector adj = Vector::Zero(resid.rows());
  Index i = 0;
  for (Index q2 = 0; q2 < resid.cols(); ++q2) {
    if (q2 == q) continue;
    adj += resid.col(q2) * alpha[i++];
  }
  return adj;
}

}  // namespace

Matrix fitted_values(const ModelState& state, const Matrix& Z,
                     const std::vector<DRBasis>& bases) {
  const Index n = Z.rows();
  const Index p = state.p(), Q = state.Q();
  Matrix fitted = state.intercepts.transpose().replicate(n, 1);
  fitted += Z * state.beta_lin;
  for (Index j = 0; j < p; ++j) {
    const Matrix& u = bases[j].nonlinear_cols();
    for (Index q = 0; q < Q; ++q) {
      const Vector& b = state.beta_nl[j][q];
      if (b.size() > 0 && b.any()) fitted.col(q) += u * b;
    }
  }
  return fitted;
}

Vector residual_target_linear(Index q, const ModelState& state, const Matrix& Y,
                              const Matrix& Z, const std::vector<DRBasis>& bases) {
  const Matrix resid = Y - fitted_values(state, Z, bases);
  Vector target = Y.col(q);
  for (Index j = 0; j < state.p(); ++j) {
    const Vector& b = state.beta_nl[j][q];
    if (b.size() > 0 && b.any()) target -= bases[j].nonlinear_cols() * b;
  }
  if (state.Q() > 1) {
    const AlphaView av = alpha_from_precision(state.precision.precision, q);
    target -= cross_adjustment(q, resid, av.alpha);
  }
  return target;
}

Vector residual_target_nonlinear(Index q, const ModelState& state,
                                 const Matrix& Y, const Matrix& Z,
                                 const std::vector<DRBasis>& bases) {
  const Matrix resid = Y - fitted_values(state, Z, bases);
  Vector target = Y.col(q) - Vector::Constant(Y.rows(), state.intercepts[q]) -
                  Z * state.beta_lin.col(q);
  if (state.Q() > 1) {
    const AlphaView av = alpha_from_precision(state.precision.precision, q);
    target -= cross_adjustment(q, resid, av.alpha);
  }
  return target;
}

Vector residual_target_refit(Index q, const ModelState& state, const Matrix& Y,
                             const Matrix& Z, const std::vector<DRBasis>& bases) {
  Vector target = Y.col(q);
  if (state.Q() > 1) {
    const Matrix resid = Y - fitted_values(state, Z, bases);
    const AlphaView av = alpha_from_precision(state.precision.precision, q);
    target -= cross_adjustment(q, resid, av.alpha);
  }
  return target;
}

EffectLabels classify(const ModelState& state) {
  EffectLabels labels(state.p(), state.Q());
  for (Index q = 0; q < state.Q(); ++q) {
    for (Index j = 0; j < state.p(); ++j) {
      const bool nl = state.beta_nl[j][q].size() > 0 && state.beta_nl[j][q].any();
      if (nl) {
        labels.at(j, q) = EffectType::Nonlinear;
      } else if (state.beta_lin(j, q) != 0.0) {
        labels.at(j, q) = EffectType::Linear;
      }
    }
  }
  return labels;
}

double objective(const ModelState& state, const Matrix& Y, const Matrix& Z,
                 const std::vector<DRBasis>& bases,
                 const ObjectiveLambdas& lambdas) {
  const auto n = static_cast<double>(Y.rows());
  const Index p = state.p(), Q = state.Q();
  const Matrix& sigma = state.precision.precision;

  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NonPDPrecision("objective: precision not positive definite");
  }
  double log_det = 0.0;
  for (Index i = 0; i < Q; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));

  const Matrix resid = Y - fitted_values(state, Z, bases);
  double obj = ((resid.transpose() * resid) * sigma).trace() / n - log_det;

  for (Index q = 0; q < Q; ++q) {
    obj += lambdas.lambda1[q] * state.beta_lin.col(q).cwiseAbs().sum();
    double group_term = 0.0;
    for (Index j = 0; j < p; ++j) {
      const Vector& b = state.beta_nl[j][q];
      if (b.size() == 0 || !b.any()) continue;
      const double fit_energy =
          (bases[j].nonlinear_cols() * b).squaredNorm() / n;
      const double smooth_energy =
          state.lambda3(j, q) * (bases[j].gamma_nl().array() * b.array().square()).sum();
      group_term += std::sqrt(fit_energy + smooth_energy);
    }
    obj += lambdas.lambda2[q] * group_term;
  }
  double off_l1 = 0.0;
  for (Index a = 0; a < Q; ++a) {
    for (Index b = 0; b < Q; ++b) {
      if (a != b) off_l1 += std::abs(sigma(a, b));
    }
  }
  obj += lambdas.lambda4 * off_l1;
  return obj;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

class Fitter {
 public:
  Fitter(const Matrix& Y, const Matrix& X, const FitConfig& cfg)
      : y_(Y), cfg_(cfg), n_(Y.rows()), q_(Y.cols()), p_(X.cols()) {
    if (X.rows() != n_) throw DimensionMismatch("fit: X and Y row counts differ");
    if (q_ < 1 || p_ < 1) throw DimensionMismatch("fit: need Q >= 1 and p >= 1");
    if (!Y.allFinite() || !X.allFinite()) throw Error("fit: missing or non-finite values");
    if (cfg.max_iters < 1 || !(cfg.tol > 0.0) || cfg.folds < 2) {
      throw Error("fit: need max_iters >= 1, tol > 0, folds >= 2");
    }
    mode_ = (q_ == 1) ? FitMode::PAdRe : cfg.mode;

    bases_.reserve(p_);
    z_.resize(n_, p_);
    for (Index j = 0; j < p_; ++j) {
      bases_.push_back(DRBasis::build(X.col(j), cfg.n_interior_knots));
      z_.col(j) = bases_[j].linear_col();
      if (n_ <= bases_[j].k()) throw DimensionMismatch("fit: n must exceed basis size");
    }

    state_.beta_lin = Matrix::Zero(p_, q_);
    state_.beta_nl.resize(p_);
    for (Index j = 0; j < p_; ++j) {
      state_.beta_nl[j].assign(q_, Vector::Zero(bases_[j].gamma_nl().size()));
    }
    state_.intercepts = y_.colwise().mean();
    state_.precision.precision = Matrix::Identity(q_, q_);
    state_.lambda3.resize(p_, q_);
    for (Index q = 0; q < q_; ++q) {
      for (Index j = 0; j < p_; ++j) {
        state_.lambda3(j, q) =
            gcv_lambda3(y_.col(q), bases_[j], cfg.gcv_grid).lambda3;
      }
    }

    const std::vector<int> fold_of = make_folds(n_, cfg.folds, cfg.seed);
    train_rows_.resize(cfg.folds);
    test_rows_.resize(cfg.folds);
    for (Index i = 0; i < n_; ++i) {
      for (int f = 0; f < cfg.folds; ++f) {
        (fold_of[i] == f ? test_rows_[f] : train_rows_[f]).push_back(i);
      }
    }

    group_full_.reserve(q_);
    group_fold_.resize(q_);
    for (Index q = 0; q < q_; ++q) {
      group_full_.emplace_back(make_groups(q, nullptr));
      group_fold_[q].reserve(cfg.folds);
      for (int f = 0; f < cfg.folds; ++f) {
        group_fold_[q].emplace_back(make_groups(q, &train_rows_[f]));
      }
    }

    tuning_.resize(q_);
    lambda1_used_.assign(q_, 0.0);
    lambda2_used_.assign(q_, 0.0);
  }

  FitReport run() {
    double prev_mse = std::numeric_limits<double>::infinity();
    FitReport report;
    int iter = 0;
    for (; iter < cfg_.max_iters; ++iter) {
      step_linear(iter);
      step_nonlinear(iter);
      step_refit(iter);

      fitted_ = fitted_values(state_, z_, bases_);
      const double mse =
          (y_ - fitted_).squaredNorm() / static_cast<double>(n_ * q_);
      report.mse_trace.push_back(mse);
      report.objective_trace.push_back(current_objective());

      if (mode_ == FitMode::CoMPAdRe && q_ > 1) step_precision(iter, report);

      if (std::abs(mse - prev_mse) < cfg_.tol) {
        report.converged = true;
        ++iter;
        break;
      }
      prev_mse = mse;
    }
    report.iterations = std::min(iter, cfg_.max_iters);
    report.state = std::move(state_);
    report.labels = classify(report.state);
    report.fitted = std::move(fitted_);
    report.tuning = std::move(tuning_);
    report.lambda1_used = lambda1_used_;
    report.lambda2_used = lambda2_used_;
    report.bases = std::move(bases_);
    report.mode = mode_;
    return report;
  }

 private:
  std::vector<GroupSpec> make_groups(Index q, const std::vector<Index>* rows) const {
    std::vector<GroupSpec> groups;
    groups.reserve(p_);
    for (Index j = 0; j < p_; ++j) {
      GroupSpec g;
      g.design = rows ? rows_of(bases_[j].nonlinear_cols(), *rows)
                      : bases_[j].nonlinear_cols();
      g.gamma = bases_[j].gamma_nl();
      g.lambda3 = state_.lambda3(j, q);
      groups.push_back(std::move(g));
    }
    return groups;
  }

  template <typename Fn>
  auto with_context(int iter, const char* step, Index q, Fn&& fn) const {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(iter + 1) + ", " + step +
                  ", response " + std::to_string(q + 1) + ": " + e.what());
    }
  }

  double current_objective() const {
    ObjectiveLambdas ol;
    ol.lambda1 = Eigen::Map<const Vector>(lambda1_used_.data(), q_);
    ol.lambda2 = Eigen::Map<const Vector>(lambda2_used_.data(), q_);
    ol.lambda4 = lambda4_used_;
    return objective(state_, y_, z_, bases_, ol);
  }

  // Step 1 (lasso selection) and Step 1.5 (OLS re-estimation) share the
  // working response, so they run back to back for each q. Targets for every
  // response are frozen before any update.
  void step_linear(int iter) {
    Matrix targets(n_, q_);
    for (Index q = 0; q < q_; ++q) {
      targets.col(q) = residual_target_linear(q, state_, y_, z_, bases_);
    }

    for (Index q = 0; q < q_; ++q) {
      with_context(iter, "step 1 (linear selection)", q, [&] {
        const Vector t = targets.col(q);
        LassoProblem full(z_, t);
        double lam;
        if (cfg_.lambda1) {
          lam = (*cfg_.lambda1)[q];
        } else if (cfg_.reselect_each_iter || iter == 0) {
          lam = select_lambda1(q, t, full);
        } else {
          lam = lambda1_used_[q];
        }
        lambda1_used_[q] = lam;
        tuning_[q].lambda1_by_iter.push_back(lam);

        const Vector warm = state_.beta_lin.col(q);
        const LassoFit lfit = full.solve(lam, cfg_.solver, &warm);

        // OLS refit on the selected set; the intercept refit is the target
        // mean because the linear columns are centered.
        state_.beta_lin.col(q).setZero();
        const double b0 = t.mean();
        if (!lfit.active_set.empty()) {
          Matrix x_act(n_, static_cast<Index>(lfit.active_set.size()));
          for (std::size_t a = 0; a < lfit.active_set.size(); ++a) {
            x_act.col(a) = z_.col(lfit.active_set[a]);
          }
          const OlsFit ols = ols_refit(x_act, t.array() - b0);
          for (std::size_t a = 0; a < lfit.active_set.size(); ++a) {
            state_.beta_lin(lfit.active_set[a], q) = ols.coefs[a];
          }
        }
        state_.intercepts[q] = b0;
      });
    }
  }

  double select_lambda1(Index q, const Vector& t, const LassoProblem& full) {
    const LambdaPath path =
        make_path(full.lambda_max(), PathKind::Linear, cfg_.path_length,
                  cfg_.path_min_ratio);
    const CVRecord rec = cv_select(
        [&](int f) {
          const Matrix ztr = rows_of(z_, train_rows_[f]);
          const Vector ttr = entries_of(t, train_rows_[f]);
          const Matrix zte = rows_of(z_, test_rows_[f]);
          const Vector tte = entries_of(t, test_rows_[f]);
          LassoProblem prob(ztr, ttr);
          std::vector<double> errs(path.values.size());
          Vector warm = Vector::Zero(p_);
          for (std::size_t i = 0; i < path.values.size(); ++i) {
            const LassoFit fit = prob.solve(path.values[i], cfg_.solver, &warm);
            warm = fit.coefs;
            const Vector pred =
                (zte * fit.coefs).array() + fit.intercept;
            errs[i] = (tte - pred).squaredNorm() /
                      static_cast<double>(tte.size());
          }
          return errs;
        },
        path, cfg_.folds);
    tuning_[q].cv_lambda1 = rec;
    return rec.chosen_lambda();
  }

  void step_nonlinear(int iter) {
    Matrix targets(n_, q_);
    for (Index q = 0; q < q_; ++q) {
      targets.col(q) = residual_target_nonlinear(q, state_, y_, z_, bases_);
    }

    for (Index q = 0; q < q_; ++q) {
      with_context(iter, "step 2 (nonlinear selection)", q, [&] {
        const Vector t = targets.col(q);
        double lam;
        if (cfg_.lambda2) {
          lam = (*cfg_.lambda2)[q];
        } else if (cfg_.reselect_each_iter || iter == 0) {
          lam = select_lambda2(q, t, iter);
        } else {
          lam = lambda2_used_[q];
        }
        lambda2_used_[q] = lam;
        tuning_[q].lambda2_by_iter.push_back(lam);

        GroupLassoFit warm;
        warm.blocks.reserve(p_);
        for (Index j = 0; j < p_; ++j) warm.blocks.push_back(state_.beta_nl[j][q]);
        const GroupLassoFit gfit = group_full_[q].solve(
            t.array() - t.mean(), lam, cfg_.solver, &warm);
        for (Index j = 0; j < p_; ++j) state_.beta_nl[j][q] = gfit.blocks[j];
      });
    }
  }

  double select_lambda2(Index q, const Vector& t, int iter) {
    Vector tc = t.array() - t.mean();
    LambdaPath path =
        make_path(group_full_[q].lambda_max(tc), PathKind::Group,
                  cfg_.path_length, cfg_.path_min_ratio);
    if (iter == 0) path = guard_lambda2_range(std::move(path), p_);
    const CVRecord rec = cv_select(
        [&](int f) {
          const Vector ttr = entries_of(t, train_rows_[f]);
          const Vector tte = entries_of(t, test_rows_[f]);
          const double b0 = ttr.mean();
          const GroupLassoProblem& prob = group_fold_[q][f];
          std::vector<double> errs(path.values.size());
          GroupLassoFit warm;
          const GroupLassoFit* warm_ptr = nullptr;
          for (std::size_t i = 0; i < path.values.size(); ++i) {
            const GroupLassoFit fit = prob.solve(
                ttr.array() - b0, path.values[i], cfg_.solver, warm_ptr);
            warm = fit;
            warm_ptr = &warm;
            Vector pred = Vector::Constant(tte.size(), b0);
            for (const int j : fit.active_groups) {
              pred += rows_of(bases_[j].nonlinear_cols(), test_rows_[f]) *
                      fit.blocks[j];
            }
            errs[i] = (tte - pred).squaredNorm() /
                      static_cast<double>(tte.size());
          }
          return errs;
        },
        path, cfg_.folds);
    tuning_[q].cv_lambda2 = rec;
    return rec.chosen_lambda();
  }

  void step_refit(int iter) {
    Matrix targets(n_, q_);
    for (Index q = 0; q < q_; ++q) {
      targets.col(q) = residual_target_refit(q, state_, y_, z_, bases_);
    }

    for (Index q = 0; q < q_; ++q) {
      with_context(iter, "step 2.5 (mixed-model refit)", q, [&] {
        const Vector t = targets.col(q);
        const double b0 = t.mean();

        std::vector<int> act_lin, act_nl;
        for (Index j = 0; j < p_; ++j) {
          if (state_.beta_lin(j, q) != 0.0) act_lin.push_back(static_cast<int>(j));
          if (state_.beta_nl[j][q].any()) act_nl.push_back(static_cast<int>(j));
        }

        Matrix x_act(n_, static_cast<Index>(act_lin.size()));
        for (std::size_t a = 0; a < act_lin.size(); ++a) {
          x_act.col(a) = z_.col(act_lin[a]);
        }
        std::vector<GroupSpec> blocks;
        blocks.reserve(act_nl.size());
        for (const int j : act_nl) {
          blocks.push_back({bases_[j].nonlinear_cols(), bases_[j].gamma_nl(),
                            state_.lambda3(j, q)});
        }

        const MixedModelFit mm = mixed_model_refit(x_act, blocks, t.array() - b0);
        state_.intercepts[q] = b0;
        state_.beta_lin.col(q).setZero();
        for (std::size_t a = 0; a < act_lin.size(); ++a) {
          state_.beta_lin(act_lin[a], q) = mm.linear_coefs[a];
        }
        for (Index j = 0; j < p_; ++j) state_.beta_nl[j][q].setZero();
        for (std::size_t a = 0; a < act_nl.size(); ++a) {
          state_.beta_nl[act_nl[a]][q] = mm.nonlinear_coefs[a];
        }
      });
    }
  }

  // Precision feeds every downstream working response, so it is solved well
  // below the CV decision margins; the column-sweep order would otherwise
  // leak into the lambda selections under response permutations.
  SolverOptions precision_options() const {
    SolverOptions opts = cfg_.solver;
    opts.tol = std::min(opts.tol, 1e-10);
    opts.max_sweeps_glasso = std::max(opts.max_sweeps_glasso, 2000);
    return opts;
  }

  void step_precision(int iter, FitReport& report) {
    try {
      const Matrix resid = y_ - fitted_;
      const Matrix s = resid.transpose() * resid / static_cast<double>(n_);

      double lam4;
      if (cfg_.lambda4) {
        lam4 = *cfg_.lambda4;
      } else if (cfg_.reselect_each_iter || iter == 0) {
        lam4 = select_lambda4(resid, s);
      } else {
        lam4 = lambda4_used_;
      }
      lambda4_used_ = lam4;
      report.lambda4_by_iter.push_back(lam4);

      state_.precision =
          graphical_lasso(s, lam4, precision_options(), &state_.precision);
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(iter + 1) +
                  ", step 3 (precision selection): " + e.what());
    }
  }

  double select_lambda4(const Matrix& resid, const Matrix& s_full) {
    double off_max = 0.0;
    for (Index a = 0; a < q_; ++a) {
      for (Index b = 0; b < q_; ++b) {
        if (a != b) off_max = std::max(off_max, std::abs(s_full(a, b)));
      }
    }
    const LambdaPath path = make_path(off_max, PathKind::Precision,
                                      cfg_.path_length, cfg_.path_min_ratio);
    const CVRecord rec = cv_select(
        [&](int f) {
          const Matrix etr = rows_of(resid, train_rows_[f]);
          const Matrix ete = rows_of(resid, test_rows_[f]);
          const Matrix str =
              etr.transpose() * etr / static_cast<double>(etr.rows());
          const Matrix ste =
              ete.transpose() * ete / static_cast<double>(ete.rows());
          std::vector<double> errs(path.values.size());
          PrecisionEstimate warm;
          const PrecisionEstimate* warm_ptr = nullptr;
          for (std::size_t i = 0; i < path.values.size(); ++i) {
            const PrecisionEstimate est = graphical_lasso(
                str, path.values[i], precision_options(), warm_ptr);
            warm = est;
            warm_ptr = &warm;
            // held-out Gaussian negative log-likelihood
            Eigen::LLT<Matrix> llt(est.precision);
            double log_det = 0.0;
            for (Index d = 0; d < q_; ++d) {
              log_det += 2.0 * std::log(llt.matrixL()(d, d));
            }
            errs[i] = (ste.array() * est.precision.array()).sum() - log_det;
          }
          return errs;
        },
        path, cfg_.folds);
    return rec.chosen_lambda();
  }

  const Matrix& y_;
  FitConfig cfg_;
  Index n_, q_, p_;
  FitMode mode_;
  Matrix z_;
  std::vector<DRBasis> bases_;
  ModelState state_;
  Matrix fitted_;
  std::vector<std::vector<Index>> train_rows_, test_rows_;
  std::vector<GroupLassoProblem> group_full_;
  std::vector<std::vector<GroupLassoProblem>> group_fold_;
  std::vector<ResponseTuning> tuning_;
  std::vector<double> lambda1_used_, lambda2_used_;
  double lambda4_used_ = 0.0;
};

}  // namespace

FitReport fit(const Matrix& Y, const Matrix& X, const FitConfig& config) {
  Fitter fitter(Y, X, config);
  return fitter.run();
}

Matrix predict(const FitReport& report, const Matrix& X_new) {
  const Index p = report.state.p();
  const Index Q = report.state.Q();
  if (X_new.cols() != p) {
    throw DimensionMismatch("predict: covariate count differs from training");
  }
  const Index n = X_new.rows();
  Matrix out = report.state.intercepts.transpose().replicate(n, 1);
  for (Index j = 0; j < p; ++j) {
    const DRBasis& dr = report.bases[j];
    bool any_nl = false;
    for (Index q = 0; q < Q; ++q) {
      if (report.state.beta_nl[j][q].any()) {
        any_nl = true;
        break;
      }
    }
    for (Index i = 0; i < n; ++i) {
      const double z = dr.to_standardized(X_new(i, j));
      out.row(i) += z * report.state.beta_lin.row(j);
      if (any_nl) {
        const Vector row = dr.nonlinear_row(z);
        for (Index q = 0; q < Q; ++q) {
          const Vector& b = report.state.beta_nl[j][q];
          if (b.any()) out(i, q) += row.dot(b);
        }
      }
    }
  }
  return out;
}

}  // namespace compadre
