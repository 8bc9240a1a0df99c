#pragma once

#include <vector>

#include "compadre/types.hpp"

namespace compadre {

/// Interior knots plus the boundary pair, all in standardized covariate units.
struct KnotSet {
  Vector interior;
  double lo = 0.0;
  double hi = 0.0;

  Index count() const { return interior.size(); }
  void validate() const;
};

struct Standardized {
  Vector z;
  double center = 0.0;
  double scale = 1.0;
};

/// Center and scale to mean 0, sample standard deviation 1.
Standardized standardize(const Vector& x);

/// Inverse-CDF empirical quantile of unsorted data (always a data value).
double quantile(const Vector& x, double prob);

/// Interior knots at quantiles i/(m+1), i=1..m, deduplicated and kept strictly
/// inside the (min, max) boundary.
KnotSet quantile_knots(const Vector& z, int n_interior);

/// Knots at the deciles: quantile_knots with 9 interior knots.
KnotSet decile_knots(const Vector& z);

/// Cubic B-spline design with the exact integrated squared second derivative
/// penalty.
struct RawSplineBasis {
  Matrix design;   // n x k
  Matrix penalty;  // k x k, symmetric PSD
  KnotSet knots;
};

RawSplineBasis build_osullivan(const Vector& z, const KnotSet& knots);

/// Rows of all cubic B-spline basis functions (or a derivative order 0..2)
/// at the given points. Points must lie within [knots.lo, knots.hi].
Matrix bspline_design(const Vector& z, const KnotSet& knots, int deriv = 0);

/// Demmler-Reinsch form of a penalized spline basis for one covariate.
///
/// The raw basis is rotated so the smoothness penalty becomes diagonal. The
/// two unpenalized directions (intercept and linear) are separated out: the
/// intercept is dropped, the linear direction is represented by the
/// standardized covariate itself, and the remaining k-2 orthonormal columns
/// carry the nonlinear part with strictly positive penalties gamma
/// (stored in decreasing order).
class DRBasis {
 public:
  static DRBasis from_raw(const RawSplineBasis& raw, const Vector& z,
                          double center, double scale);
  static DRBasis build(const Vector& x_raw, int n_interior_knots = 9);

  const Vector& linear_col() const { return z_; }
  const Matrix& nonlinear_cols() const { return nonlinear_; }
  const Vector& gamma_nl() const { return gamma_; }
  double center() const { return center_; }
  double scale() const { return scale_; }
  const KnotSet& knots() const { return knots_; }
  /// Maps a raw B-spline row to the nonlinear DR coordinates (k x (k-2)).
  const Matrix& nonlinear_transform() const { return transform_; }
  Index n() const { return z_.size(); }
  Index k() const { return transform_.rows(); }

  double to_standardized(double x_raw) const { return (x_raw - center_) / scale_; }

  /// Nonlinear basis row at one standardized point; linear extrapolation from
  /// the boundary knots outside the training range.
  Vector nonlinear_row(double z) const;

  /// Fitted values of the DR smoother at penalty lambda: unpenalized
  /// projection on {1, z} plus shrunken nonlinear components.
  Vector smooth(const Vector& y, double lambda) const;
  double smoother_trace(double lambda) const;

 private:
  Vector z_;
  double center_ = 0.0;
  double scale_ = 1.0;
  KnotSet knots_;
  Matrix nonlinear_;  // n x (k-2), orthonormal columns
  Vector gamma_;      // k-2, positive, decreasing
  Matrix transform_;  // k x (k-2)
  double z_sq_ = 0.0;  // z^T z

  friend DRBasis make_drbasis_from_parts(Vector z, double center, double scale,
                                         KnotSet knots, Vector gamma,
                                         Matrix transform);
};

/// Rebuilds a DRBasis from serialized parts (training column block is
/// recomputed from the transform).
DRBasis make_drbasis_from_parts(Vector z, double center, double scale,
                                KnotSet knots, Vector gamma, Matrix transform);

struct SmoothnessParam {
  double lambda3 = 0.0;
};

/// 30 log-spaced points in [1e-4, 1e6].
std::vector<double> default_gcv_grid();

/// Pick lambda3 on the grid minimizing GCV(lambda) = n RSS / (n - tr S)^2 for
/// the bivariate smooth of y on this covariate; ties break toward larger
/// lambda.
SmoothnessParam gcv_lambda3(const Vector& y, const DRBasis& dr,
                            const std::vector<double>& grid);

}  // namespace compadre
