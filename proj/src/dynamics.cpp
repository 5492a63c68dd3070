#include "uavsim/dynamics.hpp"

#include <Eigen/Cholesky>

namespace uavsim {

void AgentModel::validate() const {
    if (A.rows() != A.cols()) throw ConfigError("AgentModel: A must be square");
    const int ns = n();
    if (B.rows() != ns) throw ConfigError("AgentModel: B row count must match A");
    if (Cg.cols() != ns) throw ConfigError("AgentModel: Cg column count must match A");
    if (Ci.cols() != ns) throw ConfigError("AgentModel: Ci column count must match A");
    if (sigma_w.rows() != ns || sigma_w.cols() != ns)
        throw ConfigError("AgentModel: sigma_w must be n x n");
    if (sigma_g.rows() != mg() || sigma_g.cols() != mg())
        throw ConfigError("AgentModel: sigma_g must be m_G x m_G");
    if (sigma_i.rows() != mi() || sigma_i.cols() != mi())
        throw ConfigError("AgentModel: sigma_i must be m_I x m_I");
    if (!is_psd(sigma_w)) throw ConfigError("AgentModel: sigma_w must be symmetric PSD");
    if (!is_psd(sigma_g) || min_eigenvalue(sigma_g) <= 0)
        throw ConfigError("AgentModel: sigma_g must be symmetric PD");
    if (!is_psd(sigma_i) || min_eigenvalue(sigma_i) <= 0)
        throw ConfigError("AgentModel: sigma_i must be symmetric PD");
    if (v_max <= 0 || a_max <= 0) throw ConfigError("AgentModel: bounds must be positive");
    if (dt <= 0) throw ConfigError("AgentModel: dt must be positive");
}

AgentModel default_model(double dt) {
    AgentModel m;
    m.dt = dt;
    m.A = Mat::Identity(4, 4);
    m.A(0, 2) = dt;
    m.A(1, 3) = dt;
    m.B = Mat::Zero(4, 2);
    m.B(2, 0) = dt;
    m.B(3, 1) = dt;
    m.Cg = Mat::Zero(2, 4);
    m.Cg(0, 0) = 1.0;
    m.Cg(1, 1) = 1.0;
    m.Ci = Mat::Zero(2, 4);
    m.Ci(0, 2) = 1.0;
    m.Ci(1, 3) = 1.0;
    m.sigma_w = 0.1 * Mat::Identity(4, 4);
    m.sigma_g = Mat::Identity(2, 2);
    m.sigma_i = 0.01 * Mat::Identity(2, 2);
    m.v_max = 5.0;
    m.a_max = 2.0;
    return m;
}

Vec clamp_norm(const Vec& v, double bound, bool* clamped) {
    const double n = v.norm();
    if (n <= bound) {
        if (clamped) *clamped = false;
        return v;
    }
    if (clamped) *clamped = true;
    return v * (bound / n);
}

namespace {

Mat psd_factor(const Mat& cov) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() == Eigen::Success) return Mat(llt.matrixL());
    return psd_sqrt(cov);  // semidefinite fallback
}

}  // namespace

TrueState step(const AgentModel& model, const TrueState& x, const Vec& u,
               GaussianStream* process_noise, StepFlags* flags) {
    if (x.x.size() != model.n()) throw ConfigError("step: state dimension mismatch");
    if (u.size() != model.m()) throw ConfigError("step: input dimension mismatch");

    StepFlags local;
    const Vec u_applied = clamp_norm(u, model.a_max, &local.input_clamped);

    TrueState next;
    next.x = model.A * x.x + model.B * u_applied;
    if (process_noise && model.sigma_w.cwiseAbs().maxCoeff() > 0)
        next.x += process_noise->correlated(psd_factor(model.sigma_w));
    next.k = x.k + 1;

    if (model.enforce_speed_limit && next.x.size() >= 4) {
        bool sc = false;
        next.x.segment<2>(2) = clamp_norm(Vec(next.x.segment<2>(2)), model.v_max, &sc);
        local.speed_clamped = sc;
    }
    if (flags) *flags = local;
    return next;
}

MeasurementPair measure(const AgentModel& model, const TrueState& x,
                        const TrueState& x_prev, const Vec& d,
                        GaussianStream* gps_noise, GaussianStream* imu_noise) {
    if (x.x.size() != model.n() || x_prev.x.size() != model.n())
        throw ConfigError("measure: state dimension mismatch");
    if (d.size() != model.mg()) throw ConfigError("measure: spoof signal dimension mismatch");

    MeasurementPair out;
    out.d = d;
    out.y_g = model.Cg * x.x + d;
    out.y_i = model.Ci * (x.x - x_prev.x);
    if (gps_noise) out.y_g += gps_noise->correlated(psd_factor(model.sigma_g));
    if (imu_noise) out.y_i += imu_noise->correlated(psd_factor(model.sigma_i));
    return out;
}

bool in_spoof_range(const Vec2& attacker_pos, const TrueState& x, double r_effect) {
    if (r_effect < 0) throw ConfigError("in_spoof_range: r_effect must be nonnegative");
    return (position_of(x.x) - attacker_pos).norm() <= r_effect;
}

}  // namespace uavsim
