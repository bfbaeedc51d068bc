#pragma once

#include <optional>
#include <string>
#include <vector>

#include "equilibrium.hpp"
#include "stability.hpp"

namespace vvo {

/// One comparison scheme's dispatch and voltage outcome over a scenario set.
struct BenchmarkResult {
    std::string scheme;                       // a1|a2|a3|a4|designed
    std::vector<Vec> voltages;                // per scenario, length N
    std::vector<Vec> dispatches;              // per scenario, length |G|
    double vdm = 0.0;                         // (1/2S) sum_s ||v_s - 1||^2
    double max_deviation = 0.0;               // max |v - 1| over buses/scenarios
    int band_violations = 0;                  // count of |v - 1| > 0.05
    std::optional<StabilityReport> stability; // rule-based schemes only
};

/// Voltage deviation metric over per-scenario voltage profiles.
double vdm(const std::vector<Vec>& voltages);

/// a1: unit power factor, q = 0 everywhere.
BenchmarkResult unit_pf(const FeederModel& model, const ScenarioSet& scenarios);

/// a2: per-scenario box-constrained least squares
/// min_{|q| <= q_hat} ||X_NG q + vtilde_s - 1||^2.
BenchmarkResult per_scenario_optimal(const FeederModel& model, const ScenarioSet& scenarios,
                                     int workers = 1);

/// a3: one dispatch for all scenarios, min sum_s ||X_NG q + vtilde_s - 1||^2
/// over the same box.
BenchmarkResult stochastic_optimal(const FeederModel& model, const ScenarioSet& scenarios);

/// a4: the IEEE default curve (vbar=1, delta=0.02, sigma=0.08,
/// q_bar = q_hat = 0.44 p_bar) run through the equilibrium solver, with a
/// stability verdict attached (defaults carry no stability guarantee).
BenchmarkResult default_1547(const FeederModel& model, const ScenarioSet& scenarios,
                             double eps = 0.01, int workers = 1);

/// Any rule set (typically a designed one) evaluated at equilibrium; used by
/// the compare table and by out-of-sample evaluation.
BenchmarkResult evaluate_rules(const FeederModel& model, const RuleSet& rules,
                               const ScenarioSet& scenarios, const std::string& tag = "designed",
                               double eps = 0.01, int workers = 1);

/// Box-constrained least squares min_{|q| <= q_hat} ||X_NG q + r||^2 by
/// projected gradient; exposed for oracle tests.
Vec box_least_squares(const Mat& x_ng, const Vec& r, const Vec& q_hat, double tol = 1e-10,
                      int max_iters = 200000);

} // namespace vvo
