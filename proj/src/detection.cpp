#include "uavsim/detection.hpp"

#include <cmath>
#include <limits>

namespace uavsim {

namespace {

// Series expansion of P(a, x), converges for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), converges for x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0) throw ConfigError("regularized_gamma_p: a must be positive");
    if (x < 0) throw ConfigError("regularized_gamma_p: x must be nonnegative");
    if (x == 0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double chi2_quantile(double alpha, int df) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("chi2_quantile: alpha must be in (0,1)");
    if (df < 1) throw ConfigError("chi2_quantile: df must be a positive integer");

    const double a = 0.5 * df;
    const double target = 1.0 - alpha;  // lower-tail probability of the quantile
    // Bracket then bisect; the CDF is monotone.
    double lo = 0.0, hi = std::max(4.0 * df, 16.0);
    while (regularized_gamma_p(a, 0.5 * hi) < target) {
        hi *= 2.0;
        if (hi > 1e9) throw NumericalError("chi2_quantile: bracketing failed");
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_gamma_p(a, 0.5 * mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

DetectorState make_detector(double alpha, double delta, int df) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("make_detector: delta must be in (0,1)");
    DetectorState det;
    det.alpha = alpha;
    det.delta = delta;
    det.df = df;
    det.threshold = chi2_quantile(alpha, df) / (1.0 - delta);
    return det;
}

Vec estimate_attack(const Vec& y_g, const Vec& x_hat_prev, const Vec& u_prev,
                    const AgentModel& model) {
    return y_g - model.Cg * (model.A * x_hat_prev + model.B * u_prev);
}

Mat innovation_cov(const AgentModel& model, const Mat& P_prev) {
    const Mat inner = model.A * P_prev * model.A.transpose() + model.sigma_w;
    return symmetrize(model.Cg * inner * model.Cg.transpose() + model.sigma_g);
}

CusumResult cusum_step(const DetectorState& det, const Vec& d_hat, const Mat& P_d) {
    if (det.S < 0) throw ConfigError("cusum_step: detector state must be nonnegative");
    Eigen::LLT<Mat> llt(symmetrize(P_d));
    if (llt.info() != Eigen::Success)
        throw NumericalError("cusum_step: innovation covariance not positive definite");
    const double stat = d_hat.dot(llt.solve(d_hat));

    CusumResult out;
    out.det = det;
    out.det.S = det.delta * det.S + stat;
    if (out.det.S > det.threshold)
        out.decision = Decision::attacked;
    else if (out.det.S < det.threshold)
        out.decision = Decision::trusted;
    else
        out.decision = det.last_decision;  // hysteresis at exact equality
    out.det.last_decision = out.decision;
    return out;
}

}  // namespace uavsim
