#include "uavsim/safety.hpp"

#include <algorithm>
#include <cmath>

#include "uavsim/detection.hpp"

namespace uavsim {

long escape_time(const AgentModel& model, const EscapeQuery& query) {
    if (query.zeta.size() != model.n())
        throw ConfigError("escape_time: zeta dimension mismatch");
    if (query.zeta.minCoeff() <= 0.0)
        throw ConfigError("escape_time: zeta must be strictly positive");
    const int df = query.df > 0 ? query.df : int(query.zeta.size());
    const double threshold = chi2_quantile(query.alpha, df);

    Mat P = symmetrize(query.P_at_attack);
    constexpr long kCap = 100000;
    for (long k = 0; k <= kCap; ++k) {
        Eigen::LLT<Mat> llt(P);
        if (llt.info() != Eigen::Success)
            throw NumericalError("escape_time: covariance not positive definite");
        if (query.zeta.dot(llt.solve(query.zeta)) < threshold) return k;
        P = imu_covariance_step(model, P);
    }
    throw NumericalError(
        "escape_time: iteration cap exceeded; GPS-denied covariance did not diverge");
}

namespace {
constexpr double kDistanceFloor = 1e-3;  // meters
}

double repulsive_potential(double D, double r_effect, double beta) {
    if (r_effect <= 0) throw ConfigError("repulsive_potential: r_effect must be positive");
    D = std::max(D, kDistanceFloor);
    if (D > r_effect) return 0.0;
    const double q = 1.0 / D - 1.0 / r_effect;
    return 0.5 * beta * q * q;
}

Vec2 repulsive_gradient(const Vec2& pos, const Vec2& attacker, double r_effect, double beta) {
    Vec2 diff = pos - attacker;
    double D = diff.norm();
    if (D < kDistanceFloor) {
        // transient coincidence of the estimates; push along a fixed axis
        diff = Vec2(kDistanceFloor, 0.0);
        D = kDistanceFloor;
    }
    if (D > r_effect) return Vec2::Zero();
    const double q = 1.0 / D - 1.0 / r_effect;
    return beta * q * (-1.0 / (D * D)) * (diff / D);
}

namespace {

struct Rollout {
    std::vector<Vec> xs;  // horizon + 1 states, xs[0] = x0
};

Rollout roll(const EscProblem& pb, const AgentModel& model, const Vec& x0,
             const std::vector<Vec2>& u) {
    Rollout r;
    r.xs.resize(pb.horizon + 1);
    r.xs[0] = x0;
    for (int i = 0; i < pb.horizon; ++i)
        r.xs[i + 1] = model.A * r.xs[i] + model.B * u[i];
    return r;
}

// Augmented-Lagrangian term for the speed inequality h = ||v|| - v_max <= 0:
// psi(h) = (max(0, lam + w h)^2 - lam^2) / (2 w).
double rollout_cost(const EscProblem& pb, const Rollout& r, const std::vector<Vec2>& u,
                    const std::vector<Vec>& goals, const std::vector<double>& lam,
                    double w_speed) {
    double c = 0.0;
    for (int j = 1; j <= pb.horizon; ++j) {
        const Vec e = r.xs[j] - goals[j];
        c += e.dot(pb.Q * e);
        if (pb.beta > 0 && j >= pb.activation_index) {
            const double D = (position_of(r.xs[j]) - pb.attacker).norm();
            c += repulsive_potential(D, pb.r_effect, pb.beta);
        }
        const double h = velocity_of(r.xs[j]).norm() - pb.v_max;
        const double m = std::max(0.0, lam[size_t(j)] + w_speed * h);
        c += (m * m - lam[size_t(j)] * lam[size_t(j)]) / (2.0 * w_speed);
    }
    for (const Vec2& ui : u) c += ui.dot(pb.R * ui);
    return c;
}

// Adjoint sweep: gradient of the rollout cost with respect to each control.
void rollout_grad(const EscProblem& pb, const AgentModel& model, const Rollout& r,
                  const std::vector<Vec2>& u, const std::vector<Vec>& goals,
                  const std::vector<double>& lam, double w_speed, std::vector<Vec2>& grad) {
    const int N = pb.horizon;
    Vec lambda = Vec::Zero(model.n());
    for (int j = N; j >= 1; --j) {
        Vec gx = 2.0 * (pb.Q * (r.xs[j] - goals[j]));
        if (pb.beta > 0 && j >= pb.activation_index) {
            const Vec2 gp = repulsive_gradient(position_of(r.xs[j]), pb.attacker,
                                               pb.r_effect, pb.beta);
            gx[0] += gp[0];
            gx[1] += gp[1];
        }
        const Vec2 v = velocity_of(r.xs[j]);
        const double sp = v.norm();
        const double mult = std::max(0.0, lam[size_t(j)] + w_speed * (sp - pb.v_max));
        if (mult > 0.0 && sp > 1e-12) {
            const Vec2 gv = mult * (v / sp);
            gx[2] += gv[0];
            gx[3] += gv[1];
        }
        lambda = (j == N) ? gx : Vec(gx + model.A.transpose() * lambda);
        grad[j - 1] = (model.B.transpose() * lambda) + 2.0 * (pb.R * u[j - 1]);
    }
}

Vec2 project_ball(const Vec2& v, double bound) {
    const double n = v.norm();
    return n <= bound ? v : Vec2(v * (bound / n));
}

double max_speed_violation(const EscProblem& pb, const Rollout& r) {
    double worst = 0.0;
    for (int j = 1; j <= pb.horizon; ++j)
        worst = std::max(worst, velocity_of(r.xs[j]).norm() - pb.v_max);
    return worst;
}

struct InnerResult {
    std::vector<Vec2> u;
    double cost = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

// Per-state cost Hessian blocks (PSD-projected where the repulsive term is
// indefinite) for the sequential-quadratic model.
Mat state_hessian(const EscProblem& pb, const Vec& x, int j,
                  const std::vector<double>& lam, double w_speed) {
    Mat W = 2.0 * pb.Q;
    if (pb.beta > 0 && j >= pb.activation_index) {
        Vec2 diff = position_of(x) - pb.attacker;
        const double D = diff.norm();
        if (D >= 1e-3 && D <= pb.r_effect) {
            const Vec2 dir = diff / D;
            const double q = 1.0 / D - 1.0 / pb.r_effect;
            // psi(D) = (beta/2) q^2, psi' = -beta q / D^2,
            // psi'' = beta (1/D^4 + 2 q / D^3); tangential curvature psi'/D.
            const double radial = pb.beta * (1.0 / (D * D * D * D) + 2.0 * q / (D * D * D));
            const double tangential = -pb.beta * q / (D * D * D);
            const Mat eye2 = Mat::Identity(2, 2);
            W.topLeftCorner(2, 2) +=
                std::max(radial, 0.0) * (dir * dir.transpose()) +
                std::max(tangential, 0.0) * (eye2 - dir * dir.transpose());
        }
    }
    const Vec2 v = velocity_of(x);
    const double sp = v.norm();
    const double t = lam[size_t(j)] + w_speed * (sp - pb.v_max);
    if (t > 0.0 && sp > 1e-12) {
        const Vec2 vd = v / sp;
        const Mat eye2 = Mat::Identity(2, 2);
        W.bottomRightCorner(2, 2) +=
            w_speed * (vd * vd.transpose()) + (t / sp) * (eye2 - vd * vd.transpose());
    }
    return W;
}

// Projected Newton-CG over the control sequence. The Gauss-Newton Hessian is
// applied matrix-free through the linear rollout map; active controls on the
// a_max sphere contribute only their tangent direction. Falls back to a
// projected-gradient step whenever the Newton direction fails to descend.
InnerResult descend(const EscProblem& pb, const AgentModel& model, const Vec& x0,
                    const std::vector<Vec>& goals, std::vector<Vec2> u,
                    const std::vector<double>& lam, double w_speed) {
    const int N = pb.horizon;

    auto cost_of = [&](const std::vector<Vec2>& c) {
        const Rollout r = roll(pb, model, x0, c);
        return rollout_cost(pb, r, c, goals, lam, w_speed);
    };

    Rollout r = roll(pb, model, x0, u);
    double cost = rollout_cost(pb, r, u, goals, lam, w_speed);
    std::vector<Vec2> grad(N), trial(N);
    double residual = 0.0;
    int it = 0;
    double pg_step = 1.0;

    std::vector<Mat> W(size_t(N) + 1);
    std::vector<bool> active(static_cast<size_t>(N));
    std::vector<Vec2> tangent(static_cast<size_t>(N));

    auto project_tangent = [&](std::vector<Vec2>& d) {
        for (int i = 0; i < N; ++i)
            if (active[size_t(i)]) d[size_t(i)] = d[size_t(i)].dot(tangent[size_t(i)]) * tangent[size_t(i)];
    };
    // H d = B^T-adjoint of W (rollout of d) + 2 R d
    auto hvp = [&](const std::vector<Vec2>& d, std::vector<Vec2>& out) {
        std::vector<Vec> dx(size_t(N) + 1, Vec::Zero(model.n()));
        for (int j = 0; j < N; ++j)
            dx[size_t(j) + 1] = model.A * dx[size_t(j)] + model.B * Vec(d[size_t(j)]);
        Vec lambda = Vec::Zero(model.n());
        for (int j = N; j >= 1; --j) {
            const Vec gy = W[size_t(j)] * dx[size_t(j)];
            lambda = (j == N) ? gy : Vec(gy + model.A.transpose() * lambda);
            out[size_t(j) - 1] = (model.B.transpose() * lambda) + 2.0 * (pb.R * d[size_t(j) - 1]);
        }
        project_tangent(out);
    };

    for (; it < pb.max_iterations; ++it) {
        rollout_grad(pb, model, r, u, goals, lam, w_speed, grad);
        residual = 0.0;
        for (int i = 0; i < N; ++i)
            residual = std::max(residual, (u[i] - project_ball(u[i] - grad[i], pb.a_max)).norm());
        if (residual <= pb.stationarity_tol) break;

        for (int j = 1; j <= N; ++j)
            W[size_t(j)] = state_hessian(pb, r.xs[size_t(j)], j, lam, w_speed);
        for (int i = 0; i < N; ++i) {
            const double nu = u[i].norm();
            active[size_t(i)] = nu >= pb.a_max * (1.0 - 1e-12) && u[i].dot(grad[i]) < 0.0;
            if (active[size_t(i)]) tangent[size_t(i)] = Vec2(-u[i][1], u[i][0]) / nu;
        }

        // truncated CG on the tangent-reduced system
        std::vector<Vec2> g_red = grad;
        project_tangent(g_red);
        std::vector<Vec2> d(static_cast<size_t>(N), Vec2::Zero()), res = g_red,
            p(static_cast<size_t>(N)), hp(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) res[size_t(i)] = -g_red[size_t(i)];
        p = res;
        double rs = 0.0;
        for (int i = 0; i < N; ++i) rs += res[size_t(i)].squaredNorm();
        const double rs0 = rs;
        const int cg_cap = std::min(2 * N, 240);
        for (int cg = 0; cg < cg_cap && rs > 1e-4 * rs0 && rs > 1e-24; ++cg) {
            hvp(p, hp);
            double php = 0.0;
            for (int i = 0; i < N; ++i) php += p[size_t(i)].dot(hp[size_t(i)]);
            if (php <= 1e-14 * rs) break;  // negative/zero curvature: stop with d so far
            const double alpha_cg = rs / php;
            double rs_next = 0.0;
            for (int i = 0; i < N; ++i) {
                d[size_t(i)] += alpha_cg * p[size_t(i)];
                res[size_t(i)] -= alpha_cg * hp[size_t(i)];
                rs_next += res[size_t(i)].squaredNorm();
            }
            const double beta_cg = rs_next / rs;
            rs = rs_next;
            for (int i = 0; i < N; ++i) p[size_t(i)] = res[size_t(i)] + beta_cg * p[size_t(i)];
        }

        double descent = 0.0;
        for (int i = 0; i < N; ++i) descent += grad[i].dot(d[size_t(i)]);

        bool improved = false;
        if (descent < 0.0) {
            double step = 1.0;
            for (int bt = 0; bt < 25; ++bt) {
                for (int i = 0; i < N; ++i)
                    trial[size_t(i)] = project_ball(u[i] + step * d[size_t(i)], pb.a_max);
                const double tc = cost_of(trial);
                if (tc < cost + 1e-4 * step * descent) {
                    u = trial;
                    cost = tc;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if (!improved) {
            for (int bt = 0; bt < 40 && !improved; ++bt) {
                for (int i = 0; i < N; ++i)
                    trial[size_t(i)] = project_ball(u[i] - pg_step * grad[i], pb.a_max);
                const double tc = cost_of(trial);
                if (tc < cost - 1e-14) {
                    u = trial;
                    cost = tc;
                    improved = true;
                    pg_step *= 1.5;
                } else {
                    pg_step *= 0.5;
                }
            }
        }
        if (!improved) break;  // no direction makes progress: report residual as-is
        r = roll(pb, model, x0, u);
        cost = rollout_cost(pb, r, u, goals, lam, w_speed);
    }
    return {std::move(u), cost, residual, it};
}

}  // namespace

EscSolution solve_esc(const EscProblem& problem, const EstimatorState& est,
                      const AgentModel& model, const std::vector<Vec2>* warm_start) {
    if (problem.horizon <= 0) throw ConfigError("solve_esc: horizon must be positive");
    if (!problem.goal) throw ConfigError("solve_esc: goal provider required");
    if (!is_psd(problem.Q) || !is_psd(problem.R))
        throw ConfigError("solve_esc: Q and R must be symmetric PSD");

    const int N = problem.horizon;
    std::vector<Vec> goals(N + 1);
    for (int j = 0; j <= N; ++j) goals[j] = problem.goal(j);

    // Initial guesses: warm start when supplied (single fast candidate),
    // otherwise coast plus, with an active attacker, a thrust-radially-away
    // guess held at a_max while below the speed bound.
    std::vector<std::vector<Vec2>> inits;
    if (warm_start && int(warm_start->size()) == N) {
        std::vector<Vec2> w = *warm_start;
        for (Vec2& ui : w) ui = project_ball(ui, problem.a_max);
        inits.push_back(std::move(w));
    } else {
        inits.emplace_back(N, Vec2::Zero());
        if (problem.beta > 0) {
            Vec2 dir = position_of(est.x_hat) - problem.attacker;
            if (dir.norm() < 1e-9) dir = Vec2(1.0, 0.0);
            dir.normalize();
            std::vector<Vec2> away(N, Vec2::Zero());
            Vec x = est.x_hat;
            for (int i = 0; i < N; ++i) {
                away[i] = velocity_of(x).norm() < problem.v_max ? Vec2(problem.a_max * dir)
                                                                : Vec2::Zero();
                x = model.A * x + model.B * away[i];
            }
            inits.push_back(std::move(away));
        }
    }

    EscSolution best;
    bool have_best = false;
    for (auto& u0 : inits) {
        // Augmented-Lagrangian outer loop on the speed inequality.
        std::vector<double> lam(size_t(N) + 1, 0.0);
        double w_speed = 1e3;
        InnerResult res = descend(problem, model, est.x_hat, goals, u0, lam, w_speed);
        double viol = max_speed_violation(problem, roll(problem, model, est.x_hat, res.u));
        for (int round = 0; viol > problem.feasibility_tol &&
                            round < problem.max_penalty_rounds;
             ++round) {
            const Rollout r = roll(problem, model, est.x_hat, res.u);
            for (int j = 1; j <= N; ++j) {
                const double h = velocity_of(r.xs[size_t(j)]).norm() - problem.v_max;
                lam[size_t(j)] = std::max(0.0, lam[size_t(j)] + w_speed * h);
            }
            w_speed *= 4.0;
            res = descend(problem, model, est.x_hat, goals, res.u, lam, w_speed);
            viol = max_speed_violation(problem, roll(problem, model, est.x_hat, res.u));
        }
        // True problem cost (multiplier terms stripped) for comparison across starts.
        const Rollout r = roll(problem, model, est.x_hat, res.u);
        const std::vector<double> zero_lam(size_t(N) + 1, 0.0);
        const double true_cost = rollout_cost(problem, r, res.u, goals, zero_lam, 1e3);

        EscSolution sol;
        sol.u = std::move(res.u);
        sol.cost = true_cost;
        sol.grad_norm = res.grad_norm;
        sol.iterations = res.iterations;
        sol.max_violation = viol;
        sol.degraded = viol > problem.feasibility_tol ||
                       res.grad_norm > problem.stationarity_tol;
        if (!have_best || sol.cost < best.cost) {
            best = std::move(sol);
            have_best = true;
        }
    }
    return best;
}

double safety_margin(const std::vector<Vec>& true_states, const Vec2& attacker,
                     double r_effect, long k_a, long k_esc) {
    const long idx = k_a + k_esc;
    if (idx < 0 || idx >= long(true_states.size()))
        throw ConfigError("safety_margin: trajectory does not cover k_a + k_esc");
    return (position_of(true_states[size_t(idx)]) - attacker).norm() - r_effect;
}

}  // namespace uavsim
