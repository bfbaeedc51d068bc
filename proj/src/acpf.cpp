#include "acpf.hpp"

#include <cmath>

namespace vvo {

namespace {

using Cx = std::complex<double>;

struct SweepOrder {
    std::vector<std::vector<int>> children;   // per bus 0..N (0 = substation)
    std::vector<int> order;                   // buses 1..N, parents before children
};

SweepOrder sweep_order(const FeederTopology& topo) {
    SweepOrder so;
    const int n = topo.bus_count;
    so.children.resize(static_cast<size_t>(n) + 1);
    for (int k = 1; k <= n; ++k)
        so.children[static_cast<size_t>(topo.parent[static_cast<size_t>(k - 1)])].push_back(k);
    so.order.reserve(static_cast<size_t>(n));
    std::vector<int> stack = so.children[0];
    while (!stack.empty()) {
        const int bus = stack.back();
        stack.pop_back();
        so.order.push_back(bus);
        for (int c : so.children[static_cast<size_t>(bus)]) stack.push_back(c);
    }
    return so;
}

} // namespace

AcSolution solve_ac(const FeederModel& model, const Vec& p_inj, const Vec& q_inj,
                    const AcOptions& opts) {
    const int n = model.bus_count();
    if (p_inj.size() != n || q_inj.size() != n)
        fail(ErrorCode::DimensionMismatch, "injections must cover all buses");
    const FeederTopology& topo = model.topology();
    const SweepOrder so = sweep_order(topo);

    std::vector<Cx> z(static_cast<size_t>(n) + 1);
    for (int k = 1; k <= n; ++k)
        z[static_cast<size_t>(k)] =
            Cx(topo.line_r[static_cast<size_t>(k - 1)], topo.line_x[static_cast<size_t>(k - 1)]);

    const Cx v_root(model.v0(), 0.0);
    std::vector<Cx> v(static_cast<size_t>(n) + 1, v_root);
    std::vector<Cx> i_line(static_cast<size_t>(n) + 1, Cx(0.0, 0.0));

    AcSolution sol;
    sol.converged = false;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        // Backward: branch currents from the leaves up. KCL at bus k:
        // current from the parent feeds the children minus local injection.
        for (auto it = so.order.rbegin(); it != so.order.rend(); ++it) {
            const int k = *it;
            const Cx s_inj(p_inj(k - 1), q_inj(k - 1));
            Cx acc = -std::conj(s_inj / v[static_cast<size_t>(k)]);
            for (int c : so.children[static_cast<size_t>(k)]) acc += i_line[static_cast<size_t>(c)];
            i_line[static_cast<size_t>(k)] = acc;
        }
        // Forward: voltage drops from the substation down.
        double delta = 0.0;
        for (int k : so.order) {
            const Cx v_new = v[static_cast<size_t>(topo.parent[static_cast<size_t>(k - 1)])] -
                             z[static_cast<size_t>(k)] * i_line[static_cast<size_t>(k)];
            delta = std::max(delta, std::abs(v_new - v[static_cast<size_t>(k)]));
            v[static_cast<size_t>(k)] = v_new;
            if (!std::isfinite(v_new.real()) || !std::isfinite(v_new.imag()) ||
                std::abs(v_new) < 0.3)
                fail(ErrorCode::Diverged, "power flow diverged: voltage collapse");
        }
        sol.sweeps = sweep + 1;
        if (delta <= opts.tol) {
            sol.converged = true;
            break;
        }
    }
    if (!sol.converged) fail(ErrorCode::Diverged, "power flow did not settle within sweep limit");

    // Independent balance check: recompute branch currents from the voltage
    // profile and verify complex power balance at every bus.
    std::vector<Cx> i_ohm(static_cast<size_t>(n) + 1);
    for (int k = 1; k <= n; ++k)
        i_ohm[static_cast<size_t>(k)] =
            (v[static_cast<size_t>(topo.parent[static_cast<size_t>(k - 1)])] -
             v[static_cast<size_t>(k)]) /
            z[static_cast<size_t>(k)];
    sol.mismatch = 0.0;
    for (int k = 1; k <= n; ++k) {
        Cx i_net = i_ohm[static_cast<size_t>(k)];
        for (int c : so.children[static_cast<size_t>(k)]) i_net -= i_ohm[static_cast<size_t>(c)];
        const Cx s_implied = v[static_cast<size_t>(k)] * std::conj(i_net);
        const Cx s_spec(p_inj(k - 1), q_inj(k - 1));
        sol.mismatch = std::max(sol.mismatch, std::abs(s_implied + s_spec));
    }

    sol.v.assign(v.begin() + 1, v.end());
    sol.v_mag = Vec(n);
    sol.v_ang = Vec(n);
    for (int k = 0; k < n; ++k) {
        sol.v_mag(k) = std::abs(sol.v[static_cast<size_t>(k)]);
        sol.v_ang(k) = std::arg(sol.v[static_cast<size_t>(k)]);
    }
    return sol;
}

Equilibrium simulate_dynamics_ac(const FeederModel& model, const RuleSet& rules,
                                 const Scenario& scenario, const DynamicsOptions& opts,
                                 Trajectory* trajectory, const AcOptions& ac_opts) {
    if (rules.size() != model.inverter_count())
        fail(ErrorCode::DimensionMismatch, "one rule per inverter bus required");
    const Vec p_inj = scenario.p_g - scenario.p_l;

    Equilibrium eq;
    eq.method = "dynamics-ac";
    eq.converged = false;
    Vec q = Vec::Zero(model.inverter_count());
    Vec v_mag = opts.v_init ? *opts.v_init
                            : solve_ac(model, p_inj, Vec(-scenario.q_l), ac_opts).v_mag;
    for (int t = 0; t < opts.max_steps; ++t) {
        const Vec q_next = eval_rules(rules, model.restrict_g(v_mag));
        const Vec q_inj = model.embed(q_next) - scenario.q_l;
        v_mag = solve_ac(model, p_inj, q_inj, ac_opts).v_mag;
        if (trajectory) {
            trajectory->q.push_back(q_next);
            trajectory->v.push_back(v_mag);
        }
        eq.iterations = t + 1;
        eq.residual = (q_next - q).lpNorm<Eigen::Infinity>();
        q = q_next;
        if (eq.residual <= opts.tol) {
            eq.converged = true;
            break;
        }
    }
    eq.q_eq = q;
    eq.v_eq = v_mag;
    return eq;
}

} // namespace vvo
