#pragma once

#include <string>
#include <vector>

#include "feeder.hpp"
#include "rules.hpp"

namespace vvo {

/// Fixed point of the closed-loop dynamics / minimizer of the equivalent
/// convex program.
struct Equilibrium {
    Vec q_eq;                 // |G|, pu
    Vec v_eq;                 // N, pu
    std::string method;       // "dynamics" or "prox"
    int iterations = 0;
    double residual = 0.0;    // ||q^{t+1}-q^t||_inf or prox fixed-point residual
    bool converged = true;
};

/// Recorded (v^t, q^t) pairs, one entry per dynamics step.
struct Trajectory {
    std::vector<Vec> v;
    std::vector<Vec> q;

    int steps() const { return static_cast<int>(q.size()); }
};

struct DynamicsOptions {
    int max_steps = 10000;
    double tol = 1e-9;           // on ||q^{t+1} - q^t||_inf
    const Vec* v_init = nullptr; // defaults to vtilde (q = 0 start)
};

/// Iterate v^t = X q^t + vtilde, q^{t+1} = f(v^t) until the reactive
/// updates settle. Never throws on non-convergence: the trajectory is
/// returned with converged=false.
Equilibrium simulate_dynamics(const FeederModel& model, const RuleSet& rules,
                              const Scenario& scenario, const DynamicsOptions& opts = {},
                              Trajectory* trajectory = nullptr);

struct ProxOptions {
    int max_iters = 100000;
    double tol = 1e-10;          // prox-gradient fixed-point residual, inf-norm
    bool accelerate = false;     // FISTA momentum
};

/// Minimize 1/2 q'X_GG q + q'(vtilde_G - vbar) + sum c_n/2 q_n^2 + delta_n|q_n|
/// over the box |q_n| <= q_bar_n by proximal gradient. Throws MaxIterations
/// if the residual target is not met.
Equilibrium solve_equilibrium_qp(const FeederModel& model, const RuleSet& rules,
                                 const Scenario& scenario, const ProxOptions& opts = {});

/// Non-symmetric variant: box [-q_bar_p, q_bar_m], branch-wise quadratic and
/// linear costs folded into the proximal step.
Equilibrium solve_equilibrium_nonsym(const FeederModel& model, const RuleSet& rules,
                                     const Scenario& scenario, const ProxOptions& opts = {});

/// Rule evaluation for a whole inverter set (dispatches on rule symmetry).
Vec eval_rules(const RuleSet& rules, const Vec& v_g);

} // namespace vvo
