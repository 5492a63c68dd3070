#pragma once

#include "uavsim/dynamics.hpp"
#include "uavsim/linalg.hpp"

namespace uavsim {

enum class Decision { trusted, attacked };

/// Chi-square CUSUM detector state. The threshold is chi2_df(alpha)/(1-delta).
struct DetectorState {
    double S = 0.0;
    double delta = 0.15;
    double alpha = 0.01;
    int df = 2;
    double threshold = 0.0;
    Decision last_decision = Decision::trusted;
};

/// Upper-tail chi-square quantile: q with P[chi2_df > q] = alpha.
/// Numeric inversion of the regularized incomplete gamma, |error| <= 1e-8.
double chi2_quantile(double alpha, int df);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

DetectorState make_detector(double alpha, double delta, int df);

/// d_hat = y_g - Cg (A x_hat_prev + B u_prev). Uses the previous estimate;
/// the current one is correlated with the current output.
Vec estimate_attack(const Vec& y_g, const Vec& x_hat_prev, const Vec& u_prev,
                    const AgentModel& model);

/// P_d = Cg (A P A^T + sigma_w) Cg^T + sigma_g.
Mat innovation_cov(const AgentModel& model, const Mat& P_prev);

struct CusumResult {
    DetectorState det;
    Decision decision = Decision::trusted;
};

/// S' = delta S + d_hat^T P_d^{-1} d_hat. Attacked iff S' > threshold,
/// trusted iff S' < threshold; equality retains the previous decision.
CusumResult cusum_step(const DetectorState& det, const Vec& d_hat, const Mat& P_d);

}  // namespace uavsim
