#pragma once

#include <functional>
#include <vector>

#include "uavsim/linalg.hpp"

namespace uavsim {

/// UKF over the system x_{k+1} = A_loc x_k + w, y_k = f(x_k) + v with the
/// measurement update stacked over a sliding window of the last M scalar
/// outputs; sigma points are mapped backward through powers of A_loc^{-1}.
struct UkfState {
    Vec x_hat;        // localization state (default: attacker 2-D position)
    Mat P;
    Mat A_loc;        // transition, must be invertible
    Mat sigma_wp;     // process noise covariance
    double sigma_v = 0.25;  // per-sample measurement noise variance
    int window = 3;         // M
    bool regularized = false;  // set when P_y needed a ridge
};

/// Free-space log-distance received power model (Friis-style):
///   f(x; p_uav) = p0 - 20 log10(||pos(x) - p_uav|| / d0), distance floored at d0.
struct SignalModel {
    double p0_db = 30.0;
    double d0 = 1.0;
};

double signal_strength(const SignalModel& sig, const Vec& state, const Vec2& uav_pos);

/// Measurement functor: (localization state, recorded UAV position) -> scalar.
using MeasurementFn = std::function<double(const Vec&, const Vec2&)>;

MeasurementFn measurement_fn(const SignalModel& sig);

/// Mean/covariance propagation: x <- A x, P <- A P A^T + sigma_wp.
UkfState ukf_predict(const UkfState& st);

/// 2n' sigma points as columns: x_hat +- row_i(sqrt(n' P))^T. The factor S
/// satisfies S^T S = n' P; a symmetrization retry handles loss of symmetry.
Mat sigma_points(const Vec& x_hat, const Mat& P);

/// Sliding-window measurement update. y[m] and uav_positions[m] correspond to
/// the sample taken m ticks ago (index 0 = current tick); the i-th sigma point
/// contributes the stacked prediction (f(X_i), f(A^{-1} X_i), ...).
UkfState ukf_update(const UkfState& st, const Vec& y,
                    const std::vector<Vec2>& uav_positions, const MeasurementFn& f);

UkfState ukf_update(const UkfState& st, const Vec& y,
                    const std::vector<Vec2>& uav_positions, const SignalModel& sig);

}  // namespace uavsim
