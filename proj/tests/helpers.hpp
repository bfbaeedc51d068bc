#pragma once

// Shared fixture builders for the test suite: deterministic random feeders,
// scenarios, and feasible rule sets.

#include <random>
#include <vector>

#include "feeder.hpp"
#include "projection.hpp"
#include "rules.hpp"

namespace vvt {

using vvo::FeederModel;
using vvo::FeederTopology;
using vvo::Mat;
using vvo::RuleSet;
using vvo::Scenario;
using vvo::ScenarioSet;
using vvo::Vec;

/// Chain feeder: bus k hangs off bus k-1 with reactance x[k] (and r[k]).
inline FeederTopology chain_topology(std::vector<double> x, std::vector<double> r,
                                     std::vector<int> inverters, std::vector<double> q_hat,
                                     std::vector<double> p_bar) {
    FeederTopology topo;
    topo.bus_count = static_cast<int>(x.size());
    topo.line_x = std::move(x);
    topo.line_r = std::move(r);
    topo.parent.resize(topo.line_x.size());
    for (int k = 0; k < topo.bus_count; ++k) topo.parent[static_cast<size_t>(k)] = k;
    topo.inverter_buses = std::move(inverters);
    topo.q_hat = std::move(q_hat);
    topo.p_bar = std::move(p_bar);
    return topo;
}

/// Two-bus chain with unit reactances: X = [[1, 1], [1, 2]].
inline FeederModel toy_model(double q_hat = 1.0) {
    return FeederModel::build(
        chain_topology({1.0, 1.0}, {0.05, 0.05}, {1, 2}, {q_hat, q_hat}, {1.0, 1.0}));
}

/// Random radial feeder: uniform random tree, impedances in a realistic pu
/// range, a nonempty random inverter subset.
inline FeederModel random_feeder(std::mt19937& rng, int max_buses, bool all_inverters = false) {
    std::uniform_int_distribution<int> nd(2, max_buses);
    std::uniform_real_distribution<double> xd(0.01, 0.15), rd(0.005, 0.10), qd(0.10, 0.50),
        pd(0.2, 1.0), coin(0.0, 1.0);
    const int n = nd(rng);
    FeederTopology topo;
    topo.bus_count = n;
    topo.parent.resize(static_cast<size_t>(n));
    topo.line_x.resize(static_cast<size_t>(n));
    topo.line_r.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        std::uniform_int_distribution<int> pdist(0, k); // any already-placed bus or the root
        topo.parent[static_cast<size_t>(k)] = pdist(rng);
        topo.line_x[static_cast<size_t>(k)] = xd(rng);
        topo.line_r[static_cast<size_t>(k)] = rd(rng);
    }
    for (int bus = 1; bus <= n; ++bus)
        if (all_inverters || coin(rng) < 0.5) {
            topo.inverter_buses.push_back(bus);
            topo.q_hat.push_back(qd(rng));
            topo.p_bar.push_back(pd(rng));
        }
    if (topo.inverter_buses.empty()) {
        topo.inverter_buses.push_back(n);
        topo.q_hat.push_back(qd(rng));
        topo.p_bar.push_back(pd(rng));
    }
    return FeederModel::build(topo);
}

/// Random injections, magnitude controlled by `scale` (pu).
inline Scenario random_scenario(std::mt19937& rng, const FeederModel& model, double scale,
                                long id = 0) {
    std::uniform_real_distribution<double> ud(0.0, scale);
    const int n = model.bus_count();
    Vec p_g = Vec::Zero(n), p_l(n), q_l(n);
    for (int k = 0; k < n; ++k) {
        p_l(k) = ud(rng);
        q_l(k) = 0.5 * ud(rng);
    }
    for (int i = 0; i < model.inverter_count(); ++i)
        p_g(model.inverters()[static_cast<size_t>(i)]) = ud(rng);
    return vvo::grid_conditions(model, p_g, p_l, q_l, id);
}

inline ScenarioSet random_scenarios(std::mt19937& rng, const FeederModel& model, int count,
                                    double scale) {
    ScenarioSet set;
    for (int s = 0; s < count; ++s) set.scenarios.push_back(random_scenario(rng, model, scale, s));
    return set;
}

/// Random z inside the per-coordinate boxes (may violate the coupled rows).
inline Vec random_z_boxes(std::mt19937& rng, const vvo::FeasibleSetSpec& spec) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int g = spec.inverter_count();
    Vec z(spec.dim());
    for (int n = 0; n < g; ++n) {
        z(n) = 0.95 + 0.10 * uni(rng);
        for (int b = 0; b < spec.branches; ++b) {
            const double delta = 0.03 * uni(rng);
            const double sigma = delta + 0.02 + (0.18 - delta - 0.02) * uni(rng);
            z((1 + 3 * b) * g + n) = delta;
            z((2 + 3 * b) * g + n) = sigma;
            z((3 + 3 * b) * g + n) = spec.c_lower(n) * (1.0 + 2.0 * uni(rng));
        }
    }
    return z;
}

/// Random rule set guaranteed inside Z_eps (draw, then polish to exact
/// feasibility).
inline RuleSet random_stable_rules(std::mt19937& rng, const FeederModel& model, double eps,
                                   bool nonsymmetric = false) {
    const auto spec = nonsymmetric
                          ? vvo::FeasibleSetSpec::build_nonsym(model.X_gg(), model.q_hat(), eps)
                          : vvo::FeasibleSetSpec::build(model.X_gg(), model.q_hat(), eps);
    const Vec z = vvo::polish_feasible(spec, random_z_boxes(rng, spec));
    return nonsymmetric ? vvo::from_z_nonsym(z, model.q_hat()) : vvo::from_z(z, model.q_hat());
}

/// Random slope vector inside BOTH linear stability families at margin eps:
/// draw inside the diag(X1) box, then shrink into X alpha <= (1-eps) 1.
inline Vec random_polytope_alpha(std::mt19937& rng, const Mat& x_gg, double eps) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int g = static_cast<int>(x_gg.rows());
    const Vec row_sums = x_gg * Vec::Ones(g);
    Vec alpha(g);
    for (int n = 0; n < g; ++n) alpha(n) = uni(rng) * (1.0 - eps) / row_sums(n);
    const Vec family1 = x_gg * alpha;
    double worst = 0.0;
    for (int n = 0; n < g; ++n) worst = std::max(worst, family1(n) / (1.0 - eps));
    if (worst > 1.0) alpha /= worst;
    return alpha;
}

} // namespace vvt
