#include "compadre/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace compadre {

namespace {

constexpr int kOrder = 4;  // cubic B-splines

// Full clamped knot vector: 4 copies of each boundary around the interior.
Vector full_knots(const KnotSet& ks) {
  const Index m = ks.count();
  Vector t(m + 2 * kOrder);
  for (int i = 0; i < kOrder; ++i) t[i] = ks.lo;
  for (Index i = 0; i < m; ++i) t[kOrder + i] = ks.interior[i];
  for (int i = 0; i < kOrder; ++i) t[kOrder + m + i] = ks.hi;
  return t;
}

int find_span(double x, const Vector& t, int k_basis) {
  if (x >= t[k_basis]) return k_basis - 1;
  if (x <= t[kOrder - 1]) return kOrder - 1;
  int lo = kOrder - 1, hi = k_basis - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (t[mid] <= x) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

// Values and derivatives of the 4 basis functions that are nonzero on the
// span containing x (NURBS-book recursion; clamped-end divisions guarded).
void basis_derivs(double x, const Vector& t, int span, int n_ders,
                  double ders[3][kOrder]) {
  double ndu[kOrder][kOrder], left[kOrder], right[kOrder];
  ndu[0][0] = 1.0;
  for (int j = 1; j < kOrder; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j < kOrder; ++j) ders[0][j] = ndu[j][kOrder - 1];
  if (n_ders == 0) return;

  for (int r = 0; r < kOrder; ++r) {
    int s1 = 0, s2 = 1;
    double a[2][kOrder];
    a[0][0] = 1.0;
    for (int d = 1; d <= n_ders; ++d) {
      double dv = 0.0;
      const int rk = r - d, pk = kOrder - 1 - d;
      if (r >= d) {
        const double den = ndu[pk + 1][rk];
        a[s2][0] = (den == 0.0) ? 0.0 : a[s1][0] / den;
        dv = a[s2][0] * ndu[rk][pk];
      }
      for (int j = std::max(0, -rk); j <= std::min(d - 1, kOrder - 1 - r); ++j) {
        if (j == 0 && r >= d) continue;
        const double den = ndu[pk + 1][rk + j];
        a[s2][j] =
            (den == 0.0) ? 0.0 : (a[s1][j] - (j > 0 ? a[s1][j - 1] : 0.0)) / den;
        dv += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        const double den = ndu[pk + 1][r];
        a[s2][d] = (den == 0.0) ? 0.0 : -a[s1][d - 1] / den;
        dv += a[s2][d] * ndu[r][pk];
      }
      ders[d][r] = dv;
      std::swap(s1, s2);
    }
  }
  double factor = kOrder - 1;
  for (int d = 1; d <= n_ders; ++d) {
    for (int j = 0; j < kOrder; ++j) ders[d][j] *= factor;
    factor *= kOrder - 1 - d;
  }
}

}  // namespace

void KnotSet::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo >= hi) {
    throw Error("knot boundary must be finite with lo < hi");
  }
  for (Index i = 0; i < interior.size(); ++i) {
    if (!std::isfinite(interior[i]) || interior[i] <= lo || interior[i] >= hi) {
      throw Error("interior knots must lie strictly inside the boundary");
    }
    if (i > 0 && interior[i] <= interior[i - 1]) {
      throw Error("interior knots must be strictly increasing");
    }
  }
}

Standardized standardize(const Vector& x) {
  const Index n = x.size();
  if (n < 2) throw DimensionMismatch("standardize requires n >= 2");
  const double center = x.mean();
  const double sd =
      std::sqrt((x.array() - center).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw ConstantCovariate("covariate has zero standard deviation");
  }
  return {(x.array() - center) / sd, center, sd};
}

double quantile(const Vector& x, double prob) {
  // inverse empirical CDF: the smallest data value with F(x) >= prob, so
  // quantiles of tied data are data values and deduplicate cleanly
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end());
  // the 1e-9 nudge keeps n*prob that is an integer up to roundoff on the
  // integer's side of the ceiling
  const double h =
      std::ceil(prob * static_cast<double>(s.size()) - 1e-9) - 1.0;
  const auto idx = static_cast<std::size_t>(std::max(h, 0.0));
  return s[std::min(idx, s.size() - 1)];
}

KnotSet quantile_knots(const Vector& z, int n_interior) {
  KnotSet ks;
  ks.lo = z.minCoeff();
  ks.hi = z.maxCoeff();
  std::vector<double> knots;
  for (int i = 1; i <= n_interior; ++i) {
    const double q =
        quantile(z, static_cast<double>(i) / static_cast<double>(n_interior + 1));
    if (q > ks.lo && q < ks.hi && (knots.empty() || q > knots.back())) {
      knots.push_back(q);
    }
  }
  if (knots.empty()) {
    throw TooFewDistinctValues("no interior knots left after deduplication");
  }
  ks.interior = Eigen::Map<const Vector>(knots.data(), knots.size());
  ks.validate();
  return ks;
}

KnotSet decile_knots(const Vector& z) { return quantile_knots(z, 9); }

Matrix bspline_design(const Vector& z, const KnotSet& knots, int deriv) {
  knots.validate();
  const Vector t = full_knots(knots);
  const int k_basis = static_cast<int>(knots.count()) + kOrder;
  Matrix out = Matrix::Zero(z.size(), k_basis);
  double ders[3][kOrder];
  for (Index i = 0; i < z.size(); ++i) {
    if (z[i] < knots.lo || z[i] > knots.hi) {
      throw OutOfRange("point outside the boundary knots");
    }
    const int span = find_span(z[i], t, k_basis);
    basis_derivs(z[i], t, span, deriv, ders);
    for (int j = 0; j < kOrder; ++j) {
      out(i, span - (kOrder - 1) + j) = ders[deriv][j];
    }
  }
  return out;
}

RawSplineBasis build_osullivan(const Vector& z, const KnotSet& knots) {
  RawSplineBasis raw;
  raw.knots = knots;
  raw.design = bspline_design(z, knots, 0);
  const Vector t = full_knots(knots);
  const int k_basis = static_cast<int>(knots.count()) + kOrder;
  raw.penalty = Matrix::Zero(k_basis, k_basis);

  // Second derivatives of cubics are piecewise linear, so their pairwise
  // products are quadratic: 2-point Gauss-Legendre per interval is exact.
  const double gp = 1.0 / std::sqrt(3.0);
  double ders[3][kOrder];
  for (int span = kOrder - 1; span < k_basis; ++span) {
    const double a = t[span], b = t[span + 1];
    const double dt = b - a;
    if (dt <= 0.0) continue;
    for (const double xi : {-gp, gp}) {
      const double x = 0.5 * (a + b) + 0.5 * dt * xi;
      const double w = 0.5 * dt;
      basis_derivs(x, t, span, 2, ders);
      const int base = span - (kOrder - 1);
      for (int r = 0; r < kOrder; ++r) {
        for (int c = 0; c < kOrder; ++c) {
          raw.penalty(base + r, base + c) += w * ders[2][r] * ders[2][c];
        }
      }
    }
  }
  return raw;
}

DRBasis DRBasis::from_raw(const RawSplineBasis& raw, const Vector& z,
                          double center, double scale) {
  const Index n = raw.design.rows();
  const Index k = raw.design.cols();
  if (n <= k) throw DimensionMismatch("need n > k basis functions");

  Eigen::BDCSVD<Matrix> svd(raw.design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector d = svd.singularValues();
  if (d[k - 1] < 1e-10 * d[0]) {
    throw RankDeficient("spline design is rank deficient");
  }

  const Matrix vd_inv = svd.matrixV() * d.cwiseInverse().asDiagonal();
  Matrix omega_t = vd_inv.transpose() * raw.penalty * vd_inv;
  omega_t = 0.5 * (omega_t + omega_t.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(omega_t);
  if (eig.info() != Eigen::Success) {
    throw Error("penalty eigendecomposition failed");
  }
  const Vector evals = eig.eigenvalues();  // increasing
  const double gmax = evals[k - 1];
  const double tiny = 1e-8 * gmax;
  // The transformed penalty annihilates exactly the affine directions.
  if (!(evals[0] <= tiny && evals[1] <= tiny && evals[2] > tiny)) {
    throw RankDeficient("penalty null space is not two-dimensional");
  }

  DRBasis dr;
  dr.z_ = z;
  dr.center_ = center;
  dr.scale_ = scale;
  dr.knots_ = raw.knots;
  dr.z_sq_ = z.squaredNorm();

  const Index m = k - 2;
  Matrix w_nl(k, m);
  dr.gamma_.resize(m);
  for (Index i = 0; i < m; ++i) {  // reverse to decreasing order
    w_nl.col(i) = eig.eigenvectors().col(k - 1 - i);
    dr.gamma_[i] = evals[k - 1 - i];
  }
  dr.nonlinear_ = svd.matrixU() * w_nl;
  dr.transform_ = vd_inv * w_nl;
  return dr;
}

DRBasis DRBasis::build(const Vector& x_raw, int n_interior_knots) {
  const Standardized st = standardize(x_raw);
  const KnotSet knots = quantile_knots(st.z, n_interior_knots);
  const RawSplineBasis raw = build_osullivan(st.z, knots);
  return from_raw(raw, st.z, st.center, st.scale);
}

Vector DRBasis::nonlinear_row(double z) const {
  const Vector t = full_knots(knots_);
  const int k_basis = static_cast<int>(knots_.count()) + kOrder;
  double ders[3][kOrder];

  const bool below = z < knots_.lo;
  const bool above = z > knots_.hi;
  const double at = below ? knots_.lo : (above ? knots_.hi : z);
  const int span = find_span(at, t, k_basis);

  Vector row = Vector::Zero(k_basis);
  basis_derivs(at, t, span, above || below ? 1 : 0, ders);
  for (int j = 0; j < kOrder; ++j) {
    row[span - (kOrder - 1) + j] = ders[0][j];
  }
  Vector out = transform_.transpose() * row;
  if (above || below) {
    Vector drow = Vector::Zero(k_basis);
    for (int j = 0; j < kOrder; ++j) {
      drow[span - (kOrder - 1) + j] = ders[1][j];
    }
    out += (z - at) * (transform_.transpose() * drow);
  }
  return out;
}

Vector DRBasis::smooth(const Vector& y, double lambda) const {
  if (y.size() != z_.size()) throw DimensionMismatch("smooth: y size mismatch");
  const Vector c = nonlinear_.transpose() * y;
  const Vector shrunk =
      c.array() / (1.0 + lambda * gamma_.array());
  Vector fit = Vector::Constant(y.size(), y.mean());
  fit += z_ * (z_.dot(y) / z_sq_);
  fit += nonlinear_ * shrunk;
  return fit;
}

double DRBasis::smoother_trace(double lambda) const {
  return 2.0 + (1.0 / (1.0 + lambda * gamma_.array())).sum();
}

DRBasis make_drbasis_from_parts(Vector z, double center, double scale,
                                KnotSet knots, Vector gamma, Matrix transform) {
  DRBasis dr;
  dr.center_ = center;
  dr.scale_ = scale;
  dr.knots_ = std::move(knots);
  dr.gamma_ = std::move(gamma);
  dr.transform_ = std::move(transform);
  if (z.size() > 0) {
    dr.z_sq_ = z.squaredNorm();
    dr.nonlinear_ = bspline_design(z, dr.knots_, 0) * dr.transform_;
  }
  dr.z_ = std::move(z);
  return dr;
}

std::vector<double> default_gcv_grid() {
  std::vector<double> grid(30);
  const double lo = std::log(1e-4), hi = std::log(1e6);
  for (int i = 0; i < 30; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / 29.0);
  }
  return grid;
}

SmoothnessParam gcv_lambda3(const Vector& y, const DRBasis& dr,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw Error("gcv_lambda3: empty grid");
  const auto n = static_cast<double>(y.size());
  const Vector c = dr.nonlinear_cols().transpose() * y;
  Vector res0 = y.array() - y.mean();
  res0 -= dr.linear_col() * (dr.linear_col().dot(y) /
                             dr.linear_col().squaredNorm());
  const double base_rss = res0.squaredNorm();

  double best_gcv = std::numeric_limits<double>::infinity();
  double best_lambda = grid.front();
  for (const double lambda : grid) {
    const Eigen::ArrayXd w = 1.0 / (1.0 + lambda * dr.gamma_nl().array());
    const double rss =
        base_rss - (c.array().square() * (2.0 * w - w.square())).sum();
    const double tr = 2.0 + w.sum();
    const double gcv = n * rss / ((n - tr) * (n - tr));
    if (gcv <= best_gcv) {  // ties toward larger lambda (grid is increasing)
      best_gcv = gcv;
      best_lambda = lambda;
    }
  }
  return {best_lambda};
}

}  // namespace compadre
