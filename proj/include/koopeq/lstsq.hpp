#pragma once

#include "koopeq/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace koopeq {

/// Default singular-value cutoff, relative to the largest singular value.
inline constexpr double kDefaultRcond = 1e-10;

struct LstsqSolution {
    Eigen::MatrixXd coefficients;  // G minimizing ||Y - G X||_F with minimum ||G||_F
    Eigen::Index rank = 0;
    double sigma_max = 0.0;
};

/// Minimum-norm least squares G = Y X^+, with singular values below
/// rcond * sigma_max treated as zero. Tall problems (many columns) are first
/// reduced by a Householder QR of X^T so the SVD only sees an l x l factor.
inline LstsqSolution solve_min_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double rcond = kDefaultRcond) {
    require(x.cols() == y.cols(), ErrorKind::dimension_mismatch, "regressor and target column counts differ");
    require(x.cols() >= 1, ErrorKind::empty_data, "least squares needs at least one data column");
    require(x.allFinite() && y.allFinite(), ErrorKind::invalid_input, "least-squares data must be finite");
    require(rcond >= 0.0, ErrorKind::invalid_input, "rcond must be non-negative");

    const Eigen::Index l = x.rows();
    const Eigen::Index m = x.cols();
    LstsqSolution out;

    // Solve X^T G^T = Y^T.
    Eigen::MatrixXd a;    // small factor whose SVD is taken (rows x l)
    Eigen::MatrixXd rhs;  // transformed right-hand side
    if (m >= 2 * l) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x.transpose());
        a = qr.matrixQR().topRows(l).triangularView<Eigen::Upper>();
        Eigen::MatrixXd qty = y.transpose();
        qty.applyOnTheLeft(qr.householderQ().transpose());
        rhs = qty.topRows(l);
    } else {
        a = x.transpose();
        rhs = y.transpose();
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    out.sigma_max = s.size() > 0 ? s(0) : 0.0;
    require(out.sigma_max > 0.0, ErrorKind::degenerate_data, "regressor data is identically zero");
    const double cutoff = rcond * out.sigma_max;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            inv(i) = 1.0 / s(i);
            ++out.rank;
        }
    }
    const Eigen::MatrixXd gt = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * rhs);
    out.coefficients = gt.transpose();
    return out;
}

}  // namespace koopeq
