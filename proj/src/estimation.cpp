#include "uavsim/estimation.hpp"

namespace uavsim {

StackedModel make_stacked(const AgentModel& model) {
    const int mg = model.mg(), mi = model.mi(), n = model.n();
    StackedModel s;
    s.C = Mat::Zero(mg + mi, n);
    s.C.topRows(mg) = model.Cg;
    s.C.bottomRows(mi) = model.Ci;
    s.D = Mat::Zero(mg + mi, mg + mi);
    s.D.bottomRightCorner(mi, mi) = Mat::Identity(mi, mi);
    s.sigma_y = Mat::Zero(mg + mi, mg + mi);
    s.sigma_y.topLeftCorner(mg, mg) = model.sigma_g;
    s.sigma_y.bottomRightCorner(mi, mi) = model.sigma_i;
    return s;
}

StackedModel imu_only_stacked(const AgentModel& model) {
    StackedModel s;
    s.C = model.Ci;
    s.D = Mat::Identity(model.mi(), model.mi());
    s.sigma_y = model.sigma_i;
    return s;
}

Mat optimal_gain(const Mat& A, const Mat& sigma_w, const Mat& C, const Mat& D,
                 const Mat& sigma_y, const Mat& P_prev) {
    const Mat M = C * A - D * C;
    const Mat num = A * P_prev * M.transpose() + sigma_w * C.transpose();
    const Mat den = M * P_prev * M.transpose() + C * sigma_w * C.transpose() + sigma_y;
    return solve_spd_right(den, num);
}

Mat optimal_gain(const AgentModel& model, const StackedModel& stacked, const Mat& P_prev) {
    return optimal_gain(model.A, model.sigma_w, stacked.C, stacked.D, stacked.sigma_y, P_prev);
}

Mat covariance_update(const Mat& A, const Mat& sigma_w, const Mat& C, const Mat& D,
                      const Mat& sigma_y, const Mat& K, const Mat& P_prev) {
    const Mat M = C * A - D * C;
    const Mat F = A - K * M;
    const Mat I = Mat::Identity(A.rows(), A.cols());
    const Mat G = I - K * C;
    Mat P = F * P_prev * F.transpose() + G * sigma_w * G.transpose() +
            K * sigma_y * K.transpose();
    return symmetrize(P);
}

EstimatorState update(const EstimatorState& est, const AgentModel& model,
                      const StackedModel& stacked, const Vec& u_prev,
                      const MeasurementPair& y, bool gps_trusted) {
    if (est.x_hat.size() != model.n()) throw ConfigError("update: estimate dimension mismatch");
    if (u_prev.size() != model.m()) throw ConfigError("update: input dimension mismatch");

    const Vec x_pred = model.A * est.x_hat + model.B * u_prev;
    EstimatorState next;
    if (gps_trusted) {
        Vec stacked_y(y.y_g.size() + y.y_i.size());
        stacked_y << y.y_g, y.y_i;
        // innovation = y - C x_pred + D C x_hat (relative rows subtract x_hat)
        const Vec innov = stacked_y - stacked.C * x_pred + stacked.D * stacked.C * est.x_hat;
        const Mat K = optimal_gain(model, stacked, est.P);
        next.x_hat = x_pred + K * innov;
        next.P = covariance_update(model.A, model.sigma_w, stacked.C, stacked.D,
                                   stacked.sigma_y, K, est.P);
        next.mode = EstimatorMode::fused;
    } else {
        const StackedModel imu = imu_only_stacked(model);
        const Vec innov = y.y_i - imu.C * (x_pred - est.x_hat);
        const Mat K = optimal_gain(model.A, model.sigma_w, imu.C, imu.D, imu.sigma_y, est.P);
        next.x_hat = x_pred + K * innov;
        next.P = covariance_update(model.A, model.sigma_w, imu.C, imu.D, imu.sigma_y, K, est.P);
        next.mode = EstimatorMode::imu_only;
    }
    return next;
}

Mat imu_covariance_step(const AgentModel& model, const Mat& P_prev) {
    const StackedModel imu = imu_only_stacked(model);
    const Mat K = optimal_gain(model.A, model.sigma_w, imu.C, imu.D, imu.sigma_y, P_prev);
    return covariance_update(model.A, model.sigma_w, imu.C, imu.D, imu.sigma_y, K, P_prev);
}

}  // namespace uavsim
