#pragma once

#include "uavsim/dynamics.hpp"
#include "uavsim/linalg.hpp"

namespace uavsim {

/// Stacked output map for the fused GPS+IMU estimator. D selects the
/// relative (IMU) rows: the IMU innovation is taken against the state
/// difference rather than the absolute state.
struct StackedModel {
    Mat C;        // (m_G + m_I) x n, [Cg; Ci]
    Mat D;        // selector, identity on the IMU block
    Mat sigma_y;  // blockdiag(sigma_g, sigma_i)
};

StackedModel make_stacked(const AgentModel& model);

/// IMU-only output map (all rows relative, D = I).
StackedModel imu_only_stacked(const AgentModel& model);

enum class EstimatorMode { fused, imu_only };

struct EstimatorState {
    Vec x_hat;
    Mat P;
    EstimatorMode mode = EstimatorMode::fused;
};

/// Trace-optimal gain for the covariance recursion:
///   K = (A P (CA-DC)^T + Sw C^T) ((CA-DC) P (CA-DC)^T + C Sw C^T + Sy)^{-1}
Mat optimal_gain(const Mat& A, const Mat& sigma_w, const Mat& C, const Mat& D,
                 const Mat& sigma_y, const Mat& P_prev);

Mat optimal_gain(const AgentModel& model, const StackedModel& stacked, const Mat& P_prev);

/// Covariance recursion for an arbitrary gain K:
///   P+ = (A - K(CA-DC)) P (.)^T + (I-KC) Sw (I-KC)^T + K Sy K^T, symmetrized.
Mat covariance_update(const Mat& A, const Mat& sigma_w, const Mat& C, const Mat& D,
                      const Mat& sigma_y, const Mat& K, const Mat& P_prev);

/// One measurement update. gps_trusted selects the fused stack; otherwise the
/// gain is re-derived over the IMU-only output map (Cg rows dropped entirely,
/// which both zeroes the GPS gain block and keeps the IMU gain optimal).
EstimatorState update(const EstimatorState& est, const AgentModel& model,
                      const StackedModel& stacked, const Vec& u_prev,
                      const MeasurementPair& y, bool gps_trusted);

/// Covariance-only step of the IMU-only (GPS-denied) recursion.
Mat imu_covariance_step(const AgentModel& model, const Mat& P_prev);

}  // namespace uavsim
