#pragma once

#include <Eigen/Dense>

#include "codamed/errors.hpp"

namespace codamed::regress {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Relative pivot threshold below which a design is treated as rank deficient.
inline constexpr double kRankTolerance = 1e-10;

/// Regression design: observations in rows, regressors (including any
/// intercept column) in columns. Requires more observations than columns;
/// the rank check happens at factorization time.
template <class Scalar = double>
class DesignMatrixT {
 public:
  template <class Derived>
  explicit DesignMatrixT(const Eigen::MatrixBase<Derived>& x) : x_(x.template cast<Scalar>()) {
    if (x_.cols() == 0) throw Error(errc::dimension_mismatch, "design has no columns");
    if (x_.rows() <= x_.cols())
      throw Error(errc::underdetermined, "design needs more rows than columns");
  }

  const MatrixX<Scalar>& matrix() const { return x_; }
  Eigen::Index rows() const { return x_.rows(); }
  Eigen::Index cols() const { return x_.cols(); }

 private:
  MatrixX<Scalar> x_;
};
using DesignMatrix = DesignMatrixT<double>;

template <class Scalar = double>
struct OlsFitT {
  VectorX<Scalar> coefficients;
  MatrixX<Scalar> coef_covariance;  // s^2 (X^T X)^{-1}
  Scalar residual_variance = Scalar(0);
  Eigen::Index dof = 0;
};
using OlsFit = OlsFitT<double>;

/// Column-wise OLS of several responses on one shared design. For a shared
/// design, cov(b_{ik}, b_{il}) = [(X^T X)^{-1}]_{ii} * residual_covariance(k,l).
template <class Scalar = double>
struct MvOlsFitT {
  MatrixX<Scalar> coefficients;         // p x J, column j fits response j
  MatrixX<Scalar> residual_covariance;  // J x J cross-response residual covariance
  MatrixX<Scalar> xtx_inverse;          // p x p
  Eigen::Index dof = 0;

  MatrixX<Scalar> coef_covariance(Eigen::Index coef_index) const {
    return xtx_inverse(coef_index, coef_index) * residual_covariance;
  }
};
using MvOlsFit = MvOlsFitT<double>;

namespace detail {

// Rank-revealing QR of the design; shared by both fits. Inverts X^T X through
// the triangular factor rather than forming normal equations.
template <class Scalar>
struct Factorization {
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr;
  MatrixX<Scalar> xtx_inverse;

  explicit Factorization(const MatrixX<Scalar>& x) : qr(x) {
    qr.setThreshold(Scalar(kRankTolerance));
    const Eigen::Index p = x.cols();
    if (qr.rank() < p) throw Error(errc::rank_deficient, "design matrix is rank deficient");
    MatrixX<Scalar> r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    MatrixX<Scalar> rinv =
        r.template triangularView<Eigen::Upper>().solve(MatrixX<Scalar>::Identity(p, p));
    MatrixX<Scalar> unpermuted = rinv * rinv.transpose();
    xtx_inverse = qr.colsPermutation() * unpermuted * qr.colsPermutation().transpose();
  }
};

}  // namespace detail

template <class Scalar, class Derived>
OlsFitT<Scalar> ols_fit(const DesignMatrixT<Scalar>& design,
                        const Eigen::MatrixBase<Derived>& response) {
  const MatrixX<Scalar>& x = design.matrix();
  VectorX<Scalar> y = response.template cast<Scalar>();
  if (y.size() != x.rows())
    throw Error(errc::dimension_mismatch, "response length does not match design rows");
  detail::Factorization<Scalar> fac(x);
  OlsFitT<Scalar> fit;
  fit.coefficients = fac.qr.solve(y);
  VectorX<Scalar> residuals = y - x * fit.coefficients;
  fit.dof = x.rows() - x.cols();
  fit.residual_variance = residuals.squaredNorm() / Scalar(fit.dof);
  fit.coef_covariance = fit.residual_variance * fac.xtx_inverse;
  return fit;
}

template <class Scalar, class Derived>
MvOlsFitT<Scalar> mv_ols_fit(const DesignMatrixT<Scalar>& design,
                             const Eigen::MatrixBase<Derived>& responses) {
  const MatrixX<Scalar>& x = design.matrix();
  MatrixX<Scalar> ys = responses.template cast<Scalar>();
  if (ys.rows() != x.rows())
    throw Error(errc::dimension_mismatch, "responses do not match design rows");
  if (ys.cols() == 0) throw Error(errc::dimension_mismatch, "no response columns");
  detail::Factorization<Scalar> fac(x);
  MvOlsFitT<Scalar> fit;
  fit.coefficients = fac.qr.solve(ys);
  MatrixX<Scalar> residuals = ys - x * fit.coefficients;
  fit.dof = x.rows() - x.cols();
  fit.residual_covariance = residuals.transpose() * residuals / Scalar(fit.dof);
  fit.xtx_inverse = fac.xtx_inverse;
  return fit;
}

}  // namespace codamed::regress
