#include "compadre/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace compadre {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

std::vector<int> rank_screen(const Matrix& X, Matrix& kept, double rel_tol) {
  // Pivoted QR; columns whose R diagonal falls below rel_tol * |R_00| are
  // dropped as collinear.
  std::vector<int> dropped;
  if (X.cols() == 0) {
    kept = X;
    return dropped;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  const Matrix& r = qr.matrixR();
  const double pivot0 = std::abs(r(0, 0));
  Index rank = 0;
  for (Index i = 0; i < std::min(X.rows(), X.cols()); ++i) {
    if (std::abs(r(i, i)) > rel_tol * pivot0) ++rank;
  }
  if (rank == X.cols()) {
    kept = X;
    return dropped;
  }
  const auto& perm = qr.colsPermutation().indices();
  for (Index i = rank; i < X.cols(); ++i) dropped.push_back(perm[i]);
  std::sort(dropped.begin(), dropped.end());
  kept.resize(X.rows(), rank);
  Index c = 0;
  for (Index j = 0; j < X.cols(); ++j) {
    if (!std::binary_search(dropped.begin(), dropped.end(), static_cast<int>(j))) {
      kept.col(c++) = X.col(j);
    }
  }
  return dropped;
}

}  // namespace

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------

LassoProblem::LassoProblem(Matrix X, Vector y) {
  if (X.rows() != y.size()) throw DimensionMismatch("lasso: X rows != y size");
  const auto n = static_cast<double>(X.rows());
  col_mean_ = X.colwise().mean();
  X.rowwise() -= col_mean_.transpose();
  xc_ = std::move(X);
  y_mean_ = y.mean();
  yc_ = y.array() - y_mean_;
  col_sq_ = xc_.colwise().squaredNorm() / n;
}

double LassoProblem::lambda_max() const {
  // per-column dots, bitwise identical to the gradient evaluated inside
  // solve(), so the lambda_max solution is all-zero exactly
  double lmax = 0.0;
  for (Index j = 0; j < p(); ++j) {
    lmax = std::max(lmax, std::abs(xc_.col(j).dot(yc_)));
  }
  return lmax / static_cast<double>(n());
}

double LassoProblem::intercept_for(const Vector& coefs) const {
  return y_mean_ - col_mean_.dot(coefs);
}

LassoFit LassoProblem::solve(double lambda1, const SolverOptions& opts,
                             const Vector* warm_start) const {
  const Index p = xc_.cols();
  const auto n = static_cast<double>(xc_.rows());
  LassoFit fit;
  fit.lambda1 = lambda1;
  fit.coefs = (warm_start && warm_start->size() == p) ? *warm_start
                                                      : Vector::Zero(p);
  Vector r = yc_ - xc_ * fit.coefs;

  fit.converged = false;
  int sweep = 0;
  for (; sweep < opts.max_sweeps_lasso; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      if (col_sq_[j] <= 0.0) continue;
      const double old = fit.coefs[j];
      const double rho = xc_.col(j).dot(r) / n + col_sq_[j] * old;
      const double next = soft_threshold(rho, lambda1) / col_sq_[j];
      if (next != old) {
        r -= (next - old) * xc_.col(j);
        fit.coefs[j] = next;
      }
    }
    // stationarity check
    const Vector g = xc_.transpose() * r / n;
    double viol = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (fit.coefs[j] != 0.0) {
        viol = std::max(viol, std::abs(g[j] - lambda1 * (fit.coefs[j] > 0 ? 1.0 : -1.0)));
      } else {
        viol = std::max(viol, std::abs(g[j]) - lambda1);
      }
    }
    if (viol <= opts.tol) {
      fit.converged = true;
      ++sweep;
      break;
    }
  }
  fit.sweeps = sweep;
  fit.intercept = intercept_for(fit.coefs);
  for (Index j = 0; j < p; ++j) {
    if (fit.coefs[j] != 0.0) fit.active_set.push_back(static_cast<int>(j));
  }
  return fit;
}

LassoFit lasso(const Matrix& X, const Vector& y, double lambda1,
               const SolverOptions& opts, const Vector* warm_start) {
  if (lambda1 < 0) throw Error("lasso: lambda1 must be nonnegative");
  return LassoProblem(X, y).solve(lambda1, opts, warm_start);
}

// ---------------------------------------------------------------------------
// OLS refit
// ---------------------------------------------------------------------------

OlsFit ols_refit(const Matrix& X_sel, const Vector& y) {
  if (X_sel.rows() != y.size()) throw DimensionMismatch("ols_refit: size mismatch");
  OlsFit fit;
  fit.coefs = Vector::Zero(X_sel.cols());
  if (X_sel.cols() == 0) return fit;

  Matrix kept;
  fit.dropped = rank_screen(X_sel, kept, 1e-10);
  const Vector sol = kept.householderQr().solve(y);
  Index c = 0;
  for (Index j = 0; j < X_sel.cols(); ++j) {
    if (std::binary_search(fit.dropped.begin(), fit.dropped.end(),
                           static_cast<int>(j))) {
      continue;
    }
    fit.coefs[j] = sol[c++];
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Group lasso
// ---------------------------------------------------------------------------

GroupLassoProblem::GroupLassoProblem(std::vector<GroupSpec> groups,
                                     GroupFactor factor) {
  if (groups.empty()) throw Error("group lasso: no groups");
  n_ = groups.front().design.rows();
  const auto n = static_cast<double>(n_);
  blocks_.reserve(groups.size());
  for (auto& g : groups) {
    if (g.design.rows() != n_) throw DimensionMismatch("group designs disagree on n");
    const Index m = g.design.cols();
    Matrix mmat = g.design.transpose() * g.design / n;
    mmat.diagonal() += g.lambda3 * g.gamma;
    Block blk;
    if (factor == GroupFactor::Cholesky) {
      Eigen::LLT<Matrix> llt(mmat);
      if (llt.info() != Eigen::Success) {
        throw Error("group block matrix M is not positive definite");
      }
      blk.r = llt.matrixU();
      blk.rinv = blk.r.template triangularView<Eigen::Upper>().solve(
          Matrix::Identity(m, m));
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(mmat);
      if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw Error("group block matrix M is not positive definite");
      }
      const Vector sqrt_ev = eig.eigenvalues().cwiseSqrt();
      blk.r = eig.eigenvectors() * sqrt_ev.asDiagonal() *
              eig.eigenvectors().transpose();
      blk.rinv = eig.eigenvectors() * sqrt_ev.cwiseInverse().asDiagonal() *
                 eig.eigenvectors().transpose();
    }
    blk.a = g.design * blk.rinv;
    Matrix b = blk.a.transpose() * blk.a / n;
    Eigen::SelfAdjointEigenSolver<Matrix> eig_b(b);
    blk.p = eig_b.eigenvectors();
    blk.d = eig_b.eigenvalues().cwiseMax(0.0);
    blocks_.push_back(std::move(blk));
  }
}

double GroupLassoProblem::lambda_max(const Vector& y) const {
  const auto n = static_cast<double>(n_);
  double lmax = 0.0;
  for (const auto& blk : blocks_) {
    lmax = std::max(lmax, (blk.a.transpose() * y / n).norm());
  }
  return lmax;
}

namespace {

// Root of h(s) = sum_i c_i^2 / (d_i s + lambda)^2 - 1 for s > 0; h is
// strictly decreasing and a root exists iff ||c|| > lambda (c has no mass on
// zero eigenvalues of B). Newton with a bisection safeguard.
double group_norm_root(const Vector& c, const Vector& d, double lambda) {
  const auto h_at = [&](double s) {
    return (c.array().square() / (d.array() * s + lambda).square()).sum() - 1.0;
  };
  double lo = 0.0;
  double hi = std::max((c.norm() - lambda) / std::max(d.maxCoeff(), 1e-300), 1e-12);
  while (h_at(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) return lo;
  }
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const Eigen::ArrayXd den = d.array() * s + lambda;
    const double h = (c.array().square() / den.square()).sum() - 1.0;
    if (std::abs(h) < 1e-13) break;
    if (h > 0) {
      lo = s;
    } else {
      hi = s;
    }
    const double hp = -2.0 * (c.array().square() * d.array() / den.cube()).sum();
    double next = s - h / hp;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-15 * s) {
      s = next;
      break;
    }
    s = next;
  }
  return s;
}

}  // namespace

GroupLassoFit GroupLassoProblem::solve(const Vector& y, double lambda2,
                                       const SolverOptions& opts,
                                       const GroupLassoFit* warm_start) const {
  if (y.size() != n_) throw DimensionMismatch("group lasso: y size mismatch");
  if (lambda2 < 0) throw Error("group lasso: lambda2 must be nonnegative");
  const auto J = static_cast<Index>(blocks_.size());
  const auto n = static_cast<double>(n_);

  std::vector<Vector> theta(J);
  Vector r = y;
  for (Index j = 0; j < J; ++j) {
    const Index m = blocks_[j].r.cols();
    if (warm_start && static_cast<Index>(warm_start->blocks.size()) == J &&
        warm_start->blocks[j].size() == m) {
      theta[j] = blocks_[j].r * warm_start->blocks[j];
      if (theta[j].any()) r -= blocks_[j].a * theta[j];
    } else {
      theta[j] = Vector::Zero(m);
    }
  }

  GroupLassoFit fit;
  fit.lambda2 = lambda2;
  fit.converged = false;
  const double check_scale = std::max(lambda2, 1e-12);

  int sweep = 0;
  for (; sweep < opts.max_sweeps_group; ++sweep) {
    for (Index j = 0; j < J; ++j) {
      const Block& blk = blocks_[j];
      Vector c = blk.a.transpose() * r / n;
      const bool was_active = theta[j].any();
      if (was_active) c += blk.p * (blk.d.asDiagonal() * (blk.p.transpose() * theta[j]));
      Vector next;
      if (c.norm() <= lambda2) {
        next = Vector::Zero(theta[j].size());
      } else if (lambda2 == 0.0) {
        const Vector ct = blk.p.transpose() * c;
        next = blk.p * (ct.array() / blk.d.array().max(1e-300)).matrix();
      } else {
        const Vector ct = blk.p.transpose() * c;
        const double s = group_norm_root(ct, blk.d, lambda2);
        next = blk.p *
               ((s * ct.array()) / (blk.d.array() * s + lambda2)).matrix();
      }
      if (was_active || next.any()) {
        r += blk.a * (theta[j] - next);
        theta[j] = std::move(next);
      }
    }
    // block subgradient conditions
    double viol = 0.0;
    for (Index j = 0; j < J; ++j) {
      const Vector g = blocks_[j].a.transpose() * r / n;
      const double tn = theta[j].norm();
      if (tn > 0.0) {
        viol = std::max(viol, (g - lambda2 / tn * theta[j]).norm());
      } else {
        viol = std::max(viol, g.norm() - lambda2);
      }
    }
    if (viol <= opts.tol * check_scale) {
      fit.converged = true;
      ++sweep;
      break;
    }
  }
  fit.sweeps = sweep;
  fit.blocks.resize(J);
  for (Index j = 0; j < J; ++j) {
    fit.blocks[j] = blocks_[j].rinv * theta[j];
    if (theta[j].any()) {
      fit.active_groups.push_back(static_cast<int>(j));
    } else {
      fit.blocks[j].setZero();
    }
  }
  return fit;
}

GroupLassoFit group_lasso_smooth(const std::vector<GroupSpec>& groups,
                                 const Vector& y, double lambda2,
                                 const SolverOptions& opts, GroupFactor factor,
                                 const GroupLassoFit* warm_start) {
  return GroupLassoProblem(groups, factor).solve(y, lambda2, opts, warm_start);
}

// ---------------------------------------------------------------------------
// Graphical lasso
// ---------------------------------------------------------------------------

namespace {

// min_b (1/2) b^T W11 b - s12^T b + lambda |b|_1 by coordinate descent.
void glasso_column_lasso(const Matrix& w11, const Vector& s12, double lambda,
                         Vector& b) {
  const Index m = s12.size();
  const double tol = 1e-10 * (1.0 + w11.diagonal().maxCoeff());
  for (int it = 0; it < 1000; ++it) {
    double delta = 0.0;
    for (Index k = 0; k < m; ++k) {
      const double old = b[k];
      const double rho = s12[k] - (w11.col(k).dot(b) - w11(k, k) * old);
      const double next = soft_threshold(rho, lambda) / w11(k, k);
      if (next != old) {
        b[k] = next;
        delta = std::max(delta, std::abs(next - old) * w11(k, k));
      }
    }
    if (delta <= tol) break;
  }
}

}  // namespace

PrecisionEstimate graphical_lasso(const Matrix& S, double lambda4,
                                  const SolverOptions& opts,
                                  const PrecisionEstimate* warm_start) {
  const Index q = S.rows();
  if (S.cols() != q) throw DimensionMismatch("graphical lasso: S not square");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + S.cwiseAbs().maxCoeff())) {
    throw NonPSDInput("graphical lasso: S not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  const double min_ev = eig.eigenvalues().minCoeff();
  if (min_ev < -1e-8) throw NonPSDInput("graphical lasso: S has negative eigenvalue");

  PrecisionEstimate est;
  est.lambda4 = lambda4;

  if (q == 1) {
    est.precision = Matrix::Constant(1, 1, 1.0 / std::max(S(0, 0), 1e-300));
    return est;
  }

  if (lambda4 == 0.0) {
    Matrix s_work = S;
    if (min_ev <= 1e-10 * std::abs(eig.eigenvalues().maxCoeff())) {
      s_work.diagonal().array() += 1e-6;
      est.jittered = true;
    }
    est.precision = s_work.llt().solve(Matrix::Identity(q, q));
    est.precision = 0.5 * (est.precision + est.precision.transpose()).eval();
    return est;
  }

  // Column-sweep graphical lasso on the working covariance W; the diagonal is
  // unpenalized so W_qq = S_qq throughout.
  Matrix w = S;
  std::vector<Vector> beta(q, Vector::Zero(q - 1));
  if (warm_start && warm_start->precision.rows() == q) {
    for (Index c = 0; c < q; ++c) {
      Index i = 0;
      for (Index r2 = 0; r2 < q; ++r2) {
        if (r2 == c) continue;
        beta[c][i++] = -warm_start->precision(r2, c) /
                       warm_start->precision(c, c);
      }
    }
  }

  Matrix w11(q - 1, q - 1);
  Vector s12(q - 1);
  Matrix theta = Matrix::Zero(q, q);
  est.converged = false;
  int sweep = 0;
  for (; sweep < opts.max_sweeps_glasso; ++sweep) {
    for (Index c = 0; c < q; ++c) {
      Index a = 0;
      for (Index r2 = 0; r2 < q; ++r2) {
        if (r2 == c) continue;
        Index b2 = 0;
        for (Index c2 = 0; c2 < q; ++c2) {
          if (c2 == c) continue;
          w11(a, b2++) = w(r2, c2);
        }
        s12[a++] = S(r2, c);
      }
      glasso_column_lasso(w11, s12, lambda4, beta[c]);
      const Vector w12 = w11 * beta[c];
      Index i = 0;
      for (Index r2 = 0; r2 < q; ++r2) {
        if (r2 == c) continue;
        w(r2, c) = w12[i];
        w(c, r2) = w12[i];
        ++i;
      }
    }
    // assemble precision and evaluate the duality gap
    for (Index c = 0; c < q; ++c) {
      double dot = 0.0;
      Index i = 0;
      for (Index r2 = 0; r2 < q; ++r2) {
        if (r2 == c) continue;
        dot += w(r2, c) * beta[c][i++];
      }
      const double tqq = 1.0 / std::max(w(c, c) - dot, 1e-300);
      theta(c, c) = tqq;
      i = 0;
      for (Index r2 = 0; r2 < q; ++r2) {
        if (r2 == c) continue;
        theta(r2, c) = -beta[c][i++] * tqq;
      }
    }
    double off_l1 = 0.0;
    for (Index c = 0; c < q; ++c) {
      for (Index r2 = 0; r2 < q; ++r2) {
        if (r2 != c) off_l1 += std::abs(theta(r2, c));
      }
    }
    const double gap = (S.array() * theta.array()).sum() -
                       static_cast<double>(q) + lambda4 * off_l1;
    if (std::abs(gap) < opts.tol) {
      est.converged = true;
      ++sweep;
      break;
    }
  }
  est.sweeps = sweep;

  // Symmetrize; an entry is zero only if both triangles agree it is.
  Matrix sym = 0.5 * (theta + theta.transpose());
  for (Index c = 0; c < q; ++c) {
    for (Index r2 = 0; r2 < q; ++r2) {
      if (r2 != c && (theta(r2, c) == 0.0 || theta(c, r2) == 0.0)) {
        sym(r2, c) = 0.0;
      }
    }
  }
  est.precision = std::move(sym);
  return est;
}

AlphaView alpha_from_precision(const Matrix& precision, Index q) {
  const Index Q = precision.rows();
  if (q < 0 || q >= Q) throw DimensionMismatch("alpha_from_precision: bad index");
  const double sqq = precision(q, q);
  if (!(sqq > 0.0)) throw NonPDPrecision("precision diagonal must be positive");
  AlphaView out;
  out.sigma_qq = sqq;
  out.alpha.resize(Q - 1);
  Index i = 0;
  for (Index r = 0; r < Q; ++r) {
    if (r == q) continue;
    out.alpha[i++] = -precision(r, q) / sqq;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mixed-model refit
// ---------------------------------------------------------------------------

MixedModelFit mixed_model_refit(const Matrix& X_sel,
                                const std::vector<GroupSpec>& blocks,
                                const Vector& y) {
  const Index n = y.size();
  if (X_sel.rows() != n && X_sel.cols() > 0) {
    throw DimensionMismatch("mixed_model_refit: X rows != y size");
  }
  MixedModelFit fit;
  Matrix x_kept;
  fit.dropped = rank_screen(X_sel, x_kept, 1e-10);
  const Index s_lin = x_kept.cols();
  Index s_total = s_lin;
  for (const auto& b : blocks) s_total += b.design.cols();

  fit.linear_coefs = Vector::Zero(X_sel.cols());
  fit.nonlinear_coefs.resize(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    fit.nonlinear_coefs[j] = Vector::Zero(blocks[j].design.cols());
  }
  if (s_total == 0) {
    fit.noise_var = y.squaredNorm() / std::max<double>(1.0, static_cast<double>(n));
    return fit;
  }

  Matrix c(n, s_total);
  if (s_lin > 0) c.leftCols(s_lin) = x_kept;
  Index off = s_lin;
  for (const auto& b : blocks) {
    c.middleCols(off, b.design.cols()) = b.design;
    off += b.design.cols();
  }

  const Matrix ctc = c.transpose() * c;
  Matrix g = ctc;
  off = s_lin;
  for (const auto& b : blocks) {
    g.diagonal().segment(off, b.design.cols()) += b.lambda3 * b.gamma;
    off += b.design.cols();
  }
  const Vector rhs = c.transpose() * y;
  Eigen::LDLT<Matrix> ldlt(g);
  const Vector sol = ldlt.solve(rhs);
  if (!sol.allFinite() ||
      (g * sol - rhs).norm() > 1e-6 * (1.0 + rhs.norm())) {
    throw SingularDesign("mixed_model_refit: singular penalized system");
  }

  Index cpos = 0;
  for (Index j = 0; j < X_sel.cols(); ++j) {
    if (std::binary_search(fit.dropped.begin(), fit.dropped.end(),
                           static_cast<int>(j))) {
      continue;
    }
    fit.linear_coefs[j] = sol[cpos++];
  }
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const Index m = blocks[j].design.cols();
    fit.nonlinear_coefs[j] = sol.segment(cpos, m);
    cpos += m;
  }

  const double rss = (y - c * sol).squaredNorm();
  const double edf = ldlt.solve(ctc).trace();
  fit.noise_var = rss / std::max(1.0, static_cast<double>(n) - edf);
  return fit;
}

}  // namespace compadre
