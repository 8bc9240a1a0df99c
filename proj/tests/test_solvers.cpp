#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "compadre/rng.hpp"
#include "compadre/solvers.hpp"
#include "compadre/spline_basis.hpp"
#include "oracles.hpp"

using namespace compadre;

namespace {

Matrix normal_matrix(Index n, Index p, Philox& rng) {
  Matrix m(n, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) m(i, j) = rng.normal();
  }
  return m;
}

Vector normal_vector(Index n, Philox& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Columns orthogonal to the intercept with X^T X / n = I.
Matrix orthonormal_centered(Index n, Index p, Philox& rng) {
  Matrix g(n, p + 1);
  g.col(0).setOnes();
  g.rightCols(p) = normal_matrix(n, p, rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() *
                   Matrix::Identity(n, p + 1);
  return std::sqrt(static_cast<double>(n)) * q.rightCols(p);
}

double lasso_objective(const Matrix& x, const Vector& y, const LassoFit& fit,
                       double lambda1) {
  const Vector r = y.array() - fit.intercept - (x * fit.coefs).array();
  return r.squaredNorm() / (2.0 * static_cast<double>(y.size())) +
         lambda1 * fit.coefs.cwiseAbs().sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// lasso
// ---------------------------------------------------------------------------

TEST_CASE("lasso at lambda 0 matches OLS") {
  Philox rng(1);
  const Matrix x = normal_matrix(60, 4, rng);
  const Vector y = normal_vector(60, rng);
  const LassoFit fit = lasso(x, y, 0.0);

  Matrix xi(60, 5);
  xi.col(0).setOnes();
  xi.rightCols(4) = x;
  const Vector ols = oracle::normal_equations(xi, y);
  CHECK(std::abs(fit.intercept - ols[0]) < 1e-6);
  CHECK((fit.coefs - ols.tail(4)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lasso on an orthonormal design soft-thresholds") {
  Philox rng(2);
  const Index n = 100, p = 5;
  const Matrix x = orthonormal_centered(n, p, rng);
  Vector y = normal_vector(n, rng);
  y.array() += 0.4;  // intercept should absorb this
  const double lambda = 0.11;
  const LassoFit fit = lasso(x, y, lambda);

  const Vector c = x.transpose() * (y.array() - y.mean()).matrix() /
                   static_cast<double>(n);
  for (Index j = 0; j < p; ++j) {
    CHECK(std::abs(fit.coefs[j] - oracle::soft(c[j], lambda)) < 1e-6);
  }
}

TEST_CASE("lasso at lambda_max returns the null model exactly") {
  Philox rng(3);
  const Matrix x = normal_matrix(50, 6, rng);
  const Vector y = normal_vector(50, rng);
  LassoProblem prob(x, y);
  const LassoFit fit = prob.solve(prob.lambda_max());
  CHECK(fit.coefs.isZero(0.0));
  CHECK(fit.active_set.empty());
  CHECK(fit.intercept == doctest::Approx(y.mean()));
}

TEST_CASE("lasso KKT conditions hold at the solution") {
  Philox rng(4);
  const Matrix x = normal_matrix(80, 10, rng);
  Vector y = x.col(0) - 0.5 * x.col(3) + normal_vector(80, rng);
  const double lambda = 0.05;
  const LassoFit fit = lasso(x, y, lambda);
  REQUIRE(fit.converged);

  const Vector r = y.array() - fit.intercept - (x * fit.coefs).array();
  const Vector g = x.transpose() * r / 80.0;
  for (Index j = 0; j < 10; ++j) {
    if (fit.coefs[j] != 0.0) {
      CHECK(std::abs(g[j] - lambda * (fit.coefs[j] > 0 ? 1 : -1)) < 1e-6);
    } else {
      CHECK(std::abs(g[j]) <= lambda + 1e-6);
    }
  }
}

TEST_CASE("lasso objective non-increasing in sweep budget") {
  Philox rng(5);
  const Matrix x = normal_matrix(70, 8, rng);
  const Vector y = normal_vector(70, rng);
  const double lambda = 0.02;
  double prev = std::numeric_limits<double>::infinity();
  for (int sweeps = 1; sweeps <= 6; ++sweeps) {
    SolverOptions opts;
    opts.max_sweeps_lasso = sweeps;
    const LassoFit fit = lasso(x, y, lambda, opts);
    const double obj = lasso_objective(x, y, fit, lambda);
    CHECK(obj <= prev + 1e-12);
    prev = obj;
  }
}

TEST_CASE("lasso warm start changes sweeps, not the solution") {
  Philox rng(6);
  const Matrix x = normal_matrix(90, 7, rng);
  const Vector y = x.col(1) + normal_vector(90, rng);
  LassoProblem prob(x, y);
  const LassoFit cold = prob.solve(0.03);
  Vector warm = cold.coefs;
  warm[0] += 0.01;  // slightly perturbed start
  const LassoFit warmed = prob.solve(0.03, {}, &warm);
  CHECK(warmed.sweeps <= cold.sweeps);
  CHECK(std::abs(lasso_objective(x, y, cold, 0.03) -
                 lasso_objective(x, y, warmed, 0.03)) < 1e-8);
}

// ---------------------------------------------------------------------------
// ols_refit
// ---------------------------------------------------------------------------

TEST_CASE("ols_refit recovers a pure linear coefficient") {
  Vector z(5);
  z << -2, -1, 0, 1, 2;
  const Matrix x = z;
  const OlsFit fit = ols_refit(x, 2.0 * z);
  CHECK(fit.coefs[0] == doctest::Approx(2.0));
  CHECK(fit.dropped.empty());
}

TEST_CASE("ols_refit returns zero for an orthogonal target") {
  Philox rng(7);
  Matrix x = normal_matrix(40, 2, rng);
  Vector y = normal_vector(40, rng);
  // project y onto the orthogonal complement of the columns
  y -= x * oracle::normal_equations(x, y);
  const OlsFit fit = ols_refit(x, y);
  CHECK(fit.coefs.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ols_refit matches the normal equations") {
  Philox rng(8);
  const Matrix x = normal_matrix(50, 3, rng);
  const Vector y = normal_vector(50, rng);
  const OlsFit fit = ols_refit(x, y);
  CHECK((fit.coefs - oracle::normal_equations(x, y)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((x.transpose() * (y - x * fit.coefs)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ols_refit drops collinear columns and reports them") {
  Philox rng(9);
  Matrix x(30, 3);
  x.col(0) = normal_vector(30, rng);
  x.col(1) = normal_vector(30, rng);
  x.col(2) = 2.0 * x.col(0) - x.col(1);
  const Vector y = normal_vector(30, rng);
  const OlsFit fit = ols_refit(x, y);
  CHECK(fit.dropped.size() == 1);
  CHECK(fit.coefs[fit.dropped[0]] == 0.0);
}

// ---------------------------------------------------------------------------
// group lasso
// ---------------------------------------------------------------------------

namespace {

std::vector<GroupSpec> two_group_problem(Philox& rng, Index n, Index m,
                                         double lambda3) {
  const Matrix u = orthonormal_centered(n, 2 * m, rng) /
                   std::sqrt(static_cast<double>(n));
  std::vector<GroupSpec> groups(2);
  groups[0] = {u.leftCols(m), Vector::LinSpaced(m, 1.0, 2.0), lambda3};
  groups[1] = {u.rightCols(m), Vector::LinSpaced(m, 1.0, 2.0), lambda3};
  return groups;
}

}  // namespace

TEST_CASE("group lasso: all groups zero at lambda_max") {
  Philox rng(10);
  auto groups = two_group_problem(rng, 100, 4, 0.3);
  const Vector y = normal_vector(100, rng);
  GroupLassoProblem prob(groups);
  const double lmax = prob.lambda_max(y);
  const GroupLassoFit fit = prob.solve(y, lmax);
  CHECK(fit.active_groups.empty());
  for (const auto& b : fit.blocks) CHECK(b.isZero(0.0));
}

TEST_CASE("group lasso single group closed form") {
  // (1/n) U^T U = I and lambda3 = 0 reduce the block update to vector
  // soft-thresholding with c = U^T y / n.
  Philox rng(11);
  const Index n = 120, m = 5;
  const Matrix u = orthonormal_centered(n, m, rng);  // U^T U / n = I
  std::vector<GroupSpec> groups(1);
  groups[0] = {u, Vector::Ones(m), 0.0};
  const Vector y = u * Vector::LinSpaced(m, 0.5, 1.0) + normal_vector(n, rng);

  const Vector c = u.transpose() * y / static_cast<double>(n);
  const double lambda2 = 0.5 * c.norm();
  const GroupLassoFit fit = group_lasso_smooth(groups, y, lambda2);
  const Vector expect = std::max(0.0, 1.0 - lambda2 / c.norm()) * c;
  CHECK((fit.blocks[0] - expect).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("group lasso keeps only the signal-bearing group") {
  Philox rng(12);
  auto groups = two_group_problem(rng, 150, 4, 0.1);
  const Vector beta = Vector::LinSpaced(4, 1.0, 2.0);
  const Vector y =
      groups[0].design * beta * 40.0 + 0.1 * normal_vector(150, rng);
  GroupLassoProblem prob(groups);
  const GroupLassoFit fit = prob.solve(y, 0.5 * prob.lambda_max(y));
  REQUIRE(fit.active_groups.size() == 1);
  CHECK(fit.active_groups[0] == 0);

  // independent proximal-gradient oracle agrees
  std::vector<oracle::IstaGroup> og(2);
  for (int j = 0; j < 2; ++j) {
    Matrix mj = groups[j].design.transpose() * groups[j].design / 150.0;
    mj.diagonal() += groups[j].lambda3 * groups[j].gamma;
    og[j] = {groups[j].design, mj};
  }
  const auto ista = oracle::ista_group_lasso(og, y, 0.5 * prob.lambda_max(y));
  CHECK((fit.blocks[0] - ista[0]).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(ista[1].cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("group lasso matches the proximal-gradient oracle with smoothing") {
  Philox rng(13);
  const Index n = 100;
  // non-orthonormal blocks with distinct smoothness levels
  std::vector<GroupSpec> groups(3);
  for (int j = 0; j < 3; ++j) {
    groups[j] = {normal_matrix(n, 3, rng), Vector::LinSpaced(3, 0.5, 4.0),
                 0.2 * (j + 1)};
  }
  const Vector y = groups[0].design.col(0) + 0.7 * groups[2].design.col(1) +
                   0.3 * normal_vector(n, rng);
  GroupLassoProblem prob(groups);
  const double lambda2 = 0.3 * prob.lambda_max(y);
  const GroupLassoFit fit = prob.solve(y, lambda2);
  REQUIRE(fit.converged);

  std::vector<oracle::IstaGroup> og(3);
  for (int j = 0; j < 3; ++j) {
    Matrix mj = groups[j].design.transpose() * groups[j].design /
                static_cast<double>(n);
    mj.diagonal() += groups[j].lambda3 * groups[j].gamma;
    og[j] = {groups[j].design, mj};
  }
  const auto ista = oracle::ista_group_lasso(og, y, lambda2);
  const double obj_cd = oracle::group_objective(og, y, lambda2, fit.blocks);
  const double obj_ista = oracle::group_objective(og, y, lambda2, ista);
  CHECK(obj_cd <= obj_ista + 1e-9);
  for (int j = 0; j < 3; ++j) {
    CHECK((fit.blocks[j] - ista[j]).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("group lasso solution invariant to the symmetric factor choice") {
  Philox rng(14);
  const Index n = 90;
  std::vector<GroupSpec> groups(2);
  groups[0] = {normal_matrix(n, 4, rng), Vector::LinSpaced(4, 1.0, 3.0), 0.7};
  groups[1] = {normal_matrix(n, 4, rng), Vector::LinSpaced(4, 0.1, 1.0), 0.05};
  const Vector y = groups[0].design.col(2) + 0.2 * normal_vector(n, rng);

  GroupLassoProblem chol(groups, GroupFactor::Cholesky);
  GroupLassoProblem sym(groups, GroupFactor::SymmetricSqrt);
  const double lambda2 = 0.4 * chol.lambda_max(y);
  const GroupLassoFit f1 = chol.solve(y, lambda2);
  const GroupLassoFit f2 = sym.solve(y, lambda2);
  for (int j = 0; j < 2; ++j) {
    CHECK((f1.blocks[j] - f2.blocks[j]).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("group lasso objective non-increasing in sweep budget") {
  Philox rng(15);
  auto groups = two_group_problem(rng, 80, 3, 0.2);
  const Vector y = groups[1].design * Vector::Ones(3) * 20.0 +
                   normal_vector(80, rng);
  GroupLassoProblem prob(groups);
  const double lambda2 = 0.3 * prob.lambda_max(y);

  std::vector<oracle::IstaGroup> og(2);
  for (int j = 0; j < 2; ++j) {
    Matrix mj = groups[j].design.transpose() * groups[j].design / 80.0;
    mj.diagonal() += groups[j].lambda3 * groups[j].gamma;
    og[j] = {groups[j].design, mj};
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int sweeps = 1; sweeps <= 5; ++sweeps) {
    SolverOptions opts;
    opts.max_sweeps_group = sweeps;
    const GroupLassoFit fit = prob.solve(y, lambda2, opts);
    const double obj = oracle::group_objective(og, y, lambda2, fit.blocks);
    CHECK(obj <= prev + 1e-12);
    prev = obj;
  }
}

TEST_CASE("group lasso warm start preserves the solution") {
  Philox rng(16);
  auto groups = two_group_problem(rng, 100, 4, 0.3);
  const Vector y = groups[0].design * Vector::Ones(4) * 15.0 +
                   normal_vector(100, rng);
  GroupLassoProblem prob(groups);
  const double lambda2 = 0.2 * prob.lambda_max(y);
  const GroupLassoFit cold = prob.solve(y, lambda2);
  const GroupLassoFit warmed = prob.solve(y, lambda2, {}, &cold);
  CHECK(warmed.sweeps <= cold.sweeps);
  std::vector<oracle::IstaGroup> og(2);
  for (int j = 0; j < 2; ++j) {
    Matrix mj = groups[j].design.transpose() * groups[j].design / 100.0;
    mj.diagonal() += groups[j].lambda3 * groups[j].gamma;
    og[j] = {groups[j].design, mj};
  }
  CHECK(std::abs(oracle::group_objective(og, y, lambda2, cold.blocks) -
                 oracle::group_objective(og, y, lambda2, warmed.blocks)) < 1e-8);
}

// ---------------------------------------------------------------------------
// graphical lasso
// ---------------------------------------------------------------------------

namespace {

Matrix random_spd(Index q, Philox& rng, double ridge = 0.5) {
  const Matrix g = normal_matrix(q + 4, q, rng);
  Matrix s = g.transpose() * g / static_cast<double>(q + 4);
  s.diagonal().array() += ridge;
  return s;
}

}  // namespace

TEST_CASE("graphical lasso at lambda 0 inverts S") {
  Philox rng(17);
  const Matrix s = random_spd(5, rng);
  const PrecisionEstimate est = graphical_lasso(s, 0.0);
  CHECK((est.precision * s - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_FALSE(est.jittered);
}

TEST_CASE("graphical lasso 2x2 closed form") {
  Matrix s(2, 2);
  s << 1.3, 0.6, 0.6, 0.9;
  for (const double lambda : {0.1, 0.3, 0.7}) {
    const PrecisionEstimate est = graphical_lasso(s, lambda);
    const Matrix w = est.precision.inverse();
    CHECK(std::abs(w(0, 0) - s(0, 0)) < 1e-6);
    CHECK(std::abs(w(1, 1) - s(1, 1)) < 1e-6);
    CHECK(std::abs(w(0, 1) - oracle::soft(s(0, 1), lambda)) < 1e-6);
  }
}

TEST_CASE("graphical lasso with full shrinkage returns a diagonal estimate") {
  Philox rng(18);
  const Matrix s = random_spd(4, rng);
  double off_max = 0.0;
  for (Index a = 0; a < 4; ++a) {
    for (Index b = 0; b < 4; ++b) {
      if (a != b) off_max = std::max(off_max, std::abs(s(a, b)));
    }
  }
  const PrecisionEstimate est = graphical_lasso(s, off_max * 1.0001);
  for (Index a = 0; a < 4; ++a) {
    for (Index b = 0; b < 4; ++b) {
      if (a == b) {
        CHECK(est.precision(a, a) == doctest::Approx(1.0 / s(a, a)));
      } else {
        CHECK(est.precision(a, b) == 0.0);
      }
    }
  }
}

TEST_CASE("graphical lasso output is symmetric positive definite") {
  Philox rng(19);
  for (const double lambda : {0.0, 0.05, 0.2}) {
    const Matrix s = random_spd(6, rng, 0.2);
    const PrecisionEstimate est = graphical_lasso(s, lambda);
    CHECK((est.precision - est.precision.transpose()).cwiseAbs().maxCoeff() <
          1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(est.precision);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    for (Index a = 0; a < 6; ++a) {
      for (Index b = 0; b < 6; ++b) {
        CHECK((est.precision(a, b) == 0.0) == (est.precision(b, a) == 0.0));
      }
    }
  }
}

TEST_CASE("graphical lasso rejects non-PSD input") {
  Matrix s(2, 2);
  s << 1.0, 2.0, 2.0, 1.0;  // eigenvalues -1 and 3
  CHECK_THROWS_AS(graphical_lasso(s, 0.1), NonPSDInput);
}

TEST_CASE("graphical lasso jitters a singular S at lambda 0") {
  Matrix s(3, 3);
  s.setZero();
  s(0, 0) = 1.0;
  s(1, 1) = 1.0;  // rank 2
  const PrecisionEstimate est = graphical_lasso(s, 0.0);
  CHECK(est.jittered);
  CHECK(est.precision.allFinite());
}

TEST_CASE("alpha_from_precision basics") {
  const Matrix eye = Matrix::Identity(3, 3);
  const AlphaView a0 = alpha_from_precision(eye, 1);
  CHECK(a0.alpha.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a0.sigma_qq == doctest::Approx(1.0));

  Matrix prec(2, 2);
  prec << 2, -1, -1, 2;
  const AlphaView a1 = alpha_from_precision(prec, 0);
  CHECK(a1.alpha[0] == doctest::Approx(0.5));
  CHECK(a1.sigma_qq == doctest::Approx(2.0));
}

TEST_CASE("alpha regression leaves residual variance 1/sigma_qq") {
  Philox rng(20);
  const Index q = 4, n = 100000;
  Matrix prec = random_spd(q, rng, 1.0);
  const Matrix cov = prec.inverse();
  const Matrix chol = Matrix(cov.llt().matrixL());

  Matrix e(n, q);
  for (Index i = 0; i < n; ++i) {
    Vector z(q);
    for (Index k = 0; k < q; ++k) z[k] = rng.normal();
    e.row(i) = (chol * z).transpose();
  }
  const Index target = 2;
  const AlphaView av = alpha_from_precision(prec, target);
  Vector resid = e.col(target);
  Index idx = 0;
  for (Index k = 0; k < q; ++k) {
    if (k != target) resid -= av.alpha[idx++] * e.col(k);
  }
  const double var = resid.squaredNorm() / static_cast<double>(n);
  CHECK(std::abs(var - 1.0 / av.sigma_qq) < 0.02 / av.sigma_qq);
}

// ---------------------------------------------------------------------------
// mixed model refit
// ---------------------------------------------------------------------------

TEST_CASE("mixed model with no blocks reduces to OLS") {
  Philox rng(21);
  const Matrix x = normal_matrix(60, 3, rng);
  const Vector y = normal_vector(60, rng);
  const MixedModelFit mm = mixed_model_refit(x, {}, y);
  CHECK((mm.linear_coefs - ols_refit(x, y).coefs).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mixed model kills a block under an enormous penalty") {
  Philox rng(22);
  const Matrix x = normal_matrix(70, 2, rng);
  std::vector<GroupSpec> blocks(1);
  blocks[0] = {normal_matrix(70, 4, rng), Vector::Ones(4), 1e10};
  const Vector y = x.col(0) + blocks[0].design.col(1) + normal_vector(70, rng);
  const MixedModelFit mm = mixed_model_refit(x, blocks, y);
  CHECK(mm.nonlinear_coefs[0].norm() < 1e-6);
}

TEST_CASE("lasso flags non-convergence and returns the best iterate") {
  Philox rng(30);
  Matrix x = normal_matrix(60, 6, rng);
  x.col(5) = x.col(0) + 0.01 * x.col(1);  // strongly correlated pair
  const Vector y = x.col(0) + normal_vector(60, rng);
  SolverOptions opts;
  opts.max_sweeps_lasso = 1;
  const LassoFit fit = lasso(x, y, 1e-4, opts);
  CHECK_FALSE(fit.converged);
  CHECK(fit.coefs.allFinite());
  CHECK(lasso(x, y, 1e-4).converged);
}

TEST_CASE("group lasso flags non-convergence under a tiny sweep budget") {
  Philox rng(31);
  std::vector<GroupSpec> groups(2);
  groups[0] = {normal_matrix(80, 3, rng), Vector::Ones(3), 0.1};
  groups[1] = {normal_matrix(80, 3, rng), Vector::Ones(3), 0.1};
  const Vector y =
      groups[0].design.col(0) + groups[1].design.col(2) + normal_vector(80, rng);
  SolverOptions opts;
  opts.max_sweeps_group = 1;
  GroupLassoProblem prob(groups);
  const GroupLassoFit fit = prob.solve(y, 1e-5, opts);
  CHECK_FALSE(fit.converged);
  CHECK(prob.solve(y, 1e-5).converged);
}

TEST_CASE("mixed model at the GCV lambda3 reproduces the DR smoother") {
  Philox rng(32);
  Vector x(140);
  for (Index i = 0; i < 140; ++i) x[i] = rng.uniform(-1.0, 1.0);
  const DRBasis dr = DRBasis::build(x);
  const Vector y = (2.0 * x.array()).sin().matrix() + normal_vector(140, rng);

  const double lambda3 = gcv_lambda3(y, dr, default_gcv_grid()).lambda3;
  const Vector smoothed = dr.smooth(y, lambda3);

  const Matrix x_sel = dr.linear_col();
  std::vector<GroupSpec> blocks(1);
  blocks[0] = {dr.nonlinear_cols(), dr.gamma_nl(), lambda3};
  const double b0 = y.mean();
  const MixedModelFit mm = mixed_model_refit(x_sel, blocks, y.array() - b0);
  const Vector refit = b0 + (dr.linear_col() * mm.linear_coefs[0] +
                             dr.nonlinear_cols() * mm.nonlinear_coefs[0]).array();
  CHECK((refit - smoothed).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mixed model matches the dense augmented solve") {
  Philox rng(23);
  const Index n = 50;
  const Matrix x = normal_matrix(n, 2, rng);
  std::vector<GroupSpec> blocks(2);
  blocks[0] = {normal_matrix(n, 3, rng), Vector::LinSpaced(3, 1.0, 2.0), 0.8};
  blocks[1] = {normal_matrix(n, 2, rng), Vector::LinSpaced(2, 0.5, 1.5), 2.5};
  const Vector y = normal_vector(n, rng);

  Matrix design(n, 2 + 3 + 2);
  design << x, blocks[0].design, blocks[1].design;
  Matrix penalty = Matrix::Zero(7, 7);
  penalty.diagonal().segment(2, 3) = 0.8 * blocks[0].gamma;
  penalty.diagonal().segment(5, 2) = 2.5 * blocks[1].gamma;
  const Vector expect = oracle::augmented_solve(design, penalty, y);

  const MixedModelFit mm = mixed_model_refit(x, blocks, y);
  CHECK((mm.linear_coefs - expect.head(2)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((mm.nonlinear_coefs[0] - expect.segment(2, 3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((mm.nonlinear_coefs[1] - expect.tail(2)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(mm.noise_var > 0.0);
}
