#pragma once

#include <functional>
#include <vector>

#include "uavsim/dynamics.hpp"
#include "uavsim/estimation.hpp"
#include "uavsim/linalg.hpp"

namespace uavsim {

/// Inputs for the escape-time computation.
struct EscapeQuery {
    Vec zeta;          // tolerable per-state error, strictly positive
    double alpha = 0.01;
    Mat P_at_attack;   // estimation error covariance at the attack tick
    int df = 0;        // 0 -> dim(zeta)
};

/// Ticks after the attack until zeta^T P_k^{-1} zeta < chi2_df(alpha) under
/// the GPS-denied covariance recursion. Finite because the IMU-only
/// covariance diverges; a 1e5-tick cap guards models that violate that.
long escape_time(const AgentModel& model, const EscapeQuery& query);

/// U_rep(D) = 0.5 beta (1/D - 1/r)^2 for D <= r, else 0. D floored at 1e-3 m.
double repulsive_potential(double D, double r_effect, double beta);

/// dU_rep/dpos at the given position (zero outside the effective range).
Vec2 repulsive_gradient(const Vec2& pos, const Vec2& attacker, double r_effect, double beta);

/// Escape MPC over a control sequence of length horizon (single shooting).
struct EscProblem {
    int horizon = 0;                     // N
    Mat Q, R;                            // stage weights (PD)
    double beta = 1e4;                   // repulsive penalty scale
    double r_effect = 30.0;              // planning radius for U_rep
    Vec2 attacker = Vec2::Zero();        // attacker position estimate
    std::function<Vec(int)> goal;        // rollout index -> goal state
    long activation_index = 0;           // U_rep applies to rollout indices >= this
    double v_max = 5.0;
    double a_max = 2.0;
    int max_iterations = 1500;
    int max_penalty_rounds = 10;
    double stationarity_tol = 1e-4;
    double feasibility_tol = 1e-6;
};

struct EscSolution {
    std::vector<Vec2> u;       // length horizon
    double cost = 0.0;
    double grad_norm = 0.0;    // projected-gradient residual at termination
    double max_violation = 0.0;
    bool degraded = false;
    int iterations = 0;
};

/// Projected-gradient solve: rollout dynamics hold by construction, controls
/// live on the a_max ball via projection, the speed bound enters as an
/// augmented-Lagrangian penalty. Returns a local minimizer no worse than the
/// initialization. An optional warm start (e.g. the previous receding-horizon
/// solution shifted by one tick) is used as an additional candidate.
EscSolution solve_esc(const EscProblem& problem, const EstimatorState& est,
                      const AgentModel& model,
                      const std::vector<Vec2>* warm_start = nullptr);

/// d(attacker, x_{k_a + k_esc}) - r_effect over a recorded true trajectory
/// indexed by tick.
double safety_margin(const std::vector<Vec>& true_states, const Vec2& attacker,
                     double r_effect, long k_a, long k_esc);

}  // namespace uavsim
