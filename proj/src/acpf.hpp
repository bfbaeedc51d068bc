#pragma once

#include <complex>
#include <vector>

#include "equilibrium.hpp"
#include "feeder.hpp"
#include "rules.hpp"

namespace vvo {

/// Exact AC solution of a radial feeder (single-phase equivalent).
struct AcSolution {
    std::vector<std::complex<double>> v;   // per bus 1..N, substation excluded
    Vec v_mag;                             // magnitudes, pu
    Vec v_ang;                             // angles, rad
    int sweeps = 0;
    double mismatch = 0.0;                 // max per-bus power-balance error
    bool converged = true;
};

struct AcOptions {
    double tol = 1e-10;    // max voltage update between sweeps, pu
    int max_sweeps = 200;
};

/// Backward/forward sweep power flow. `p_inj`, `q_inj` are net complex
/// injections per bus (generation minus load), pu. Throws Diverged when the
/// sweeps fail to settle or voltages collapse.
AcSolution solve_ac(const FeederModel& model, const Vec& p_inj, const Vec& q_inj,
                    const AcOptions& opts = {});

/// Volt/VAR dynamics replayed on the AC model: the linear voltage update is
/// replaced by a full power-flow solve each step. Voltages in the returned
/// trajectory are AC magnitudes.
Equilibrium simulate_dynamics_ac(const FeederModel& model, const RuleSet& rules,
                                 const Scenario& scenario, const DynamicsOptions& opts = {},
                                 Trajectory* trajectory = nullptr,
                                 const AcOptions& ac_opts = {});

} // namespace vvo
