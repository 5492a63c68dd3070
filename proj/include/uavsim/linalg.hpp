#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace uavsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

/// Bad configuration or schema input (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unexpected numerical breakdown (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Mat& m, double tol = 1e-9) {
    return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline double min_eigenvalue(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Mat& m, double tol = 1e-9) {
    return is_symmetric(m, 1e-6) && min_eigenvalue(m) >= -tol;
}

/// Symmetric PSD square root: returns S with S*S = m (eigenvalues clamped at 0).
inline Mat psd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    if (es.info() != Eigen::Success)
        throw NumericalError("psd_sqrt: eigendecomposition failed");
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Solve X * A = B for X with A symmetric positive definite, i.e. X = B * A^{-1}.
inline Mat solve_spd_right(const Mat& a, const Mat& b) {
    Eigen::LLT<Mat> llt(symmetrize(a));
    if (llt.info() != Eigen::Success)
        throw NumericalError("solve_spd_right: matrix not positive definite");
    return llt.solve(b.transpose()).transpose();
}

inline Vec2 position_of(const Vec& state) { return state.head<2>(); }
inline Vec2 velocity_of(const Vec& state) { return state.segment<2>(2); }

}  // namespace uavsim
