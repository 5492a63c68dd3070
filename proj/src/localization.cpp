#include "uavsim/localization.hpp"

#include <cmath>

namespace uavsim {

double signal_strength(const SignalModel& sig, const Vec& state, const Vec2& uav_pos) {
    if (sig.d0 <= 0) throw ConfigError("signal_strength: d0 must be positive");
    const double dist = std::max((position_of(state) - uav_pos).norm(), sig.d0);
    return sig.p0_db - 20.0 * std::log10(dist / sig.d0);
}

MeasurementFn measurement_fn(const SignalModel& sig) {
    return [sig](const Vec& state, const Vec2& uav_pos) {
        return signal_strength(sig, state, uav_pos);
    };
}

UkfState ukf_predict(const UkfState& st) {
    UkfState next = st;
    next.x_hat = st.A_loc * st.x_hat;
    next.P = symmetrize(st.A_loc * st.P * st.A_loc.transpose() + st.sigma_wp);
    return next;
}

Mat sigma_points(const Vec& x_hat, const Mat& P) {
    const int n = int(x_hat.size());
    Mat S;
    try {
        S = psd_sqrt(double(n) * P);
    } catch (const NumericalError&) {
        S = psd_sqrt(double(n) * symmetrize(P));  // symmetrization retry
    }
    // psd_sqrt is symmetric, so row_i(S)^T = col_i(S).
    Mat pts(n, 2 * n);
    for (int i = 0; i < n; ++i) {
        pts.col(i) = x_hat + S.col(i);
        pts.col(n + i) = x_hat - S.col(i);
    }
    return pts;
}

namespace {

Mat inverse_or_throw(const Mat& a) {
    Eigen::FullPivLU<Mat> lu(a);
    if (!lu.isInvertible())
        throw ConfigError("ukf_update: A_loc must be invertible");
    return lu.inverse();
}

}  // namespace

UkfState ukf_update(const UkfState& st, const Vec& y,
                    const std::vector<Vec2>& uav_positions, const MeasurementFn& f) {
    const int M = st.window;
    if (M < 1) throw ConfigError("ukf_update: window must be >= 1");
    if (y.size() != M || int(uav_positions.size()) != M)
        throw ConfigError("ukf_update: window not fully populated");

    const int n = int(st.x_hat.size());
    const int ns = 2 * n;
    const double w = 1.0 / double(ns);  // uniform sigma weights

    const Mat pts = sigma_points(st.x_hat, st.P);
    const Mat A_inv = inverse_or_throw(st.A_loc);

    // Stacked predicted outputs per sigma point: slot m maps the point back
    // through A^{-m} and evaluates f at that slot's recorded UAV position.
    Mat y_hat(M, ns);
    for (int i = 0; i < ns; ++i) {
        Vec xi = pts.col(i);
        for (int m = 0; m < M; ++m) {
            y_hat(m, i) = f(xi, uav_positions[size_t(m)]);
            if (m + 1 < M) xi = A_inv * xi;
        }
    }

    Vec y_bar = Vec::Zero(M);
    for (int i = 0; i < ns; ++i) y_bar += w * y_hat.col(i);

    Mat P_y = st.sigma_v * Mat::Identity(M, M);
    Mat P_xy = Mat::Zero(n, M);
    for (int i = 0; i < ns; ++i) {
        const Vec dy = y_hat.col(i) - y_bar;
        P_y += w * dy * dy.transpose();
        P_xy += w * (pts.col(i) - st.x_hat) * dy.transpose();
    }

    UkfState next = st;
    Eigen::LLT<Mat> llt(symmetrize(P_y));
    if (llt.info() != Eigen::Success) {
        P_y += 1e-9 * Mat::Identity(M, M);
        llt.compute(symmetrize(P_y));
        next.regularized = true;
        if (llt.info() != Eigen::Success)
            throw NumericalError("ukf_update: output covariance not invertible");
    }
    const Mat K = llt.solve(P_xy.transpose()).transpose();  // P_xy P_y^{-1}

    next.x_hat = st.x_hat + K * (y - y_bar);
    next.P = symmetrize(st.P - K * P_y * K.transpose());
    return next;
}

UkfState ukf_update(const UkfState& st, const Vec& y,
                    const std::vector<Vec2>& uav_positions, const SignalModel& sig) {
    return ukf_update(st, y, uav_positions, measurement_fn(sig));
}

}  // namespace uavsim
