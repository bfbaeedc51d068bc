#pragma once

#include <vector>

#include "equilibrium.hpp"
#include "projection.hpp"
#include "stability.hpp"

namespace vvo {

struct DesignConfig {
    double eps = 0.01;           // stability margin of the feasible set
    double step = 0.1;           // gradient step mu before backtracking
    double rel_tol = 1e-6;       // stop when |dF| / F_prev <= rel_tol
    double cost_floor = 1e-12;   // stop outright once F drops below this
    int max_iters = 1000;
    bool backtracking = true;    // halve mu until the cost decreases
    int max_backtracks = 30;
    bool nonsymmetric = false;   // optimize 7-parameter two-branch rules
    int multistart = 1;          // extra starts are projected random draws
    unsigned seed = 1;
    int workers = 0;             // 0: VOLTVAR_WORKERS or serial
    ProxOptions prox;            // equilibrium solver settings
    const Vec* z_init = nullptr; // replaces the project-from-origin start
};

struct DesignReport {
    Vec z;                                // final parameter vector
    std::vector<double> cost_trajectory;  // F at every accepted iterate
    std::vector<Vec> iterates;            // accepted iterates, z1 first
    std::vector<Equilibrium> equilibria;  // per scenario at final z
    StabilityReport stability;            // at final z
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;               // stopping criterion reached
    double stationarity = 0.0;            // ||z - P(z - mu g)||_inf at final z
    double wall_total_sec = 0.0;
    double wall_projection_sec = 0.0;
    double wall_equilibrium_sec = 0.0;
};

/// Voltage-deviation objective F(z) = (1/2S) sum_s ||v_s - 1||^2 with v_s
/// the equilibrium profile under `rules`.
double cost(const FeederModel& model, const RuleSet& rules, const ScenarioSet& scenarios,
            const ProxOptions& prox = {}, int workers = 1);

/// Equilibria for every scenario (parallel, index-ordered).
std::vector<Equilibrium> batch_equilibria(const FeederModel& model, const RuleSet& rules,
                                          const ScenarioSet& scenarios,
                                          const ProxOptions& prox = {}, int workers = 1);

/// dF/dz through the equilibrium map: per scenario, assemble the diagonal
/// voltage sensitivity D and rule-parameter block P of the curve, solve the
/// implicit system (I - X_GG D) y = X_NG' (v - 1), and scatter P' y.
Vec gradient(const FeederModel& model, const RuleSet& rules, const ScenarioSet& scenarios,
             const ProxOptions& prox = {}, int workers = 1);

/// Same, reusing equilibria already solved at the current iterate.
Vec gradient_at(const FeederModel& model, const RuleSet& rules,
                const std::vector<Equilibrium>& equilibria, const ScenarioSet& scenarios,
                int workers = 1);

/// Projected gradient descent over Z_eps: z1 = project(start), then
/// cost/gradient/project until the relative cost change criterion.
DesignReport design(const FeederModel& model, const ScenarioSet& scenarios,
                    const DesignConfig& config = {});

} // namespace vvo
