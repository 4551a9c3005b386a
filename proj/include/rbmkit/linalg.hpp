#pragma once

#include <Eigen/Dense>

namespace rbmkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }
inline double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline double sup_norm(const Vec& v) { return max_abs(v); }
inline double l1_norm(const Vec& v) { return v.cwiseAbs().sum(); }

/// Least-squares slope of y against x.
inline double ls_slope(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    const double xm = x.mean(), ym = y.mean();
    const double sxx = ((x - xm) * (x - xm)).sum();
    if (sxx <= 0.0) return 0.0;
    return ((x - xm) * (y - ym)).sum() / sxx;
}

/// Pearson R^2 of the least-squares line of y against x.
inline double ls_r2(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    const double xm = x.mean(), ym = y.mean();
    const double sxx = ((x - xm) * (x - xm)).sum();
    const double syy = ((y - ym) * (y - ym)).sum();
    const double sxy = ((x - xm) * (y - ym)).sum();
    if (sxx <= 0.0 || syy <= 0.0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

}  // namespace rbmkit
