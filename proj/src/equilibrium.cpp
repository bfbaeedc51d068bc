#include "equilibrium.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace vvo {

namespace {

double lambda_max(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

void check_scenario(const FeederModel& model, const RuleSet& rules, const Scenario& scenario) {
    if (rules.size() != model.inverter_count())
        fail(ErrorCode::DimensionMismatch, "one rule per inverter bus required");
    if (scenario.v_tilde.size() != model.bus_count())
        fail(ErrorCode::DimensionMismatch, "scenario grid conditions must cover all buses");
}

/// Scalar prox of mu * (c_neg/2 [q]_-^2 + d_neg [q]_- + c_pos/2 [q]_+^2
/// + d_pos [q]_+) plus the box [-lo, hi].
double prox_piecewise(double y, double mu, double c_neg, double d_neg, double lo, double c_pos,
                      double d_pos, double hi) {
    const double q_pos = (y - mu * d_pos) / (1.0 + mu * c_pos);
    if (q_pos > 0.0) return std::min(q_pos, hi);
    const double q_neg = (y + mu * d_neg) / (1.0 + mu * c_neg);
    if (q_neg < 0.0) return std::max(q_neg, -lo);
    return 0.0;
}

} // namespace

Vec eval_rules(const RuleSet& rules, const Vec& v_g) {
    if (v_g.size() != rules.size())
        fail(ErrorCode::DimensionMismatch, "voltage vector must match rule count");
    Vec q(rules.size());
    if (rules.symmetric()) {
        const auto& rs = rules.sym();
        for (int n = 0; n < q.size(); ++n) q(n) = eval(rs[static_cast<size_t>(n)], v_g(n));
    } else {
        const auto& rs = rules.nonsym();
        for (int n = 0; n < q.size(); ++n) q(n) = eval_nonsym(rs[static_cast<size_t>(n)], v_g(n));
    }
    return q;
}

Equilibrium simulate_dynamics(const FeederModel& model, const RuleSet& rules,
                              const Scenario& scenario, const DynamicsOptions& opts,
                              Trajectory* trajectory) {
    check_scenario(model, rules, scenario);
    const int g = model.inverter_count();

    Vec v = opts.v_init ? *opts.v_init : scenario.v_tilde;
    if (v.size() != model.bus_count())
        fail(ErrorCode::DimensionMismatch, "v_init must be a full bus-voltage vector");
    Vec q = Vec::Zero(g);

    Equilibrium eq;
    eq.method = "dynamics";
    eq.converged = false;
    for (int t = 0; t < opts.max_steps; ++t) {
        const Vec q_next = eval_rules(rules, model.restrict_g(v));
        const Vec v_next = model.X_ng() * q_next + scenario.v_tilde;
        if (trajectory) {
            trajectory->q.push_back(q_next);
            trajectory->v.push_back(v_next);
        }
        eq.iterations = t + 1;
        eq.residual = (q_next - q).lpNorm<Eigen::Infinity>();
        q = q_next;
        v = v_next;
        if (eq.residual <= opts.tol) {
            eq.converged = true;
            break;
        }
    }
    eq.q_eq = q;
    eq.v_eq = v;
    return eq;
}

Equilibrium solve_equilibrium_qp(const FeederModel& model, const RuleSet& rules,
                                 const Scenario& scenario, const ProxOptions& opts) {
    check_scenario(model, rules, scenario);
    const auto& rs = rules.sym();
    const int g = model.inverter_count();

    Vec c(g), delta(g), q_bar(g), v_bar(g);
    for (int n = 0; n < g; ++n) {
        const auto& r = rs[static_cast<size_t>(n)];
        c(n) = r.c;
        delta(n) = r.delta;
        q_bar(n) = r.q_bar();
        v_bar(n) = r.v_bar;
    }

    const Mat h = model.X_gg() + Mat(c.asDiagonal());
    const Vec b = model.restrict_g(scenario.v_tilde) - v_bar;
    const double mu = 1.0 / lambda_max(h);

    auto prox = [&](const Vec& y) {
        Vec out(g);
        for (int n = 0; n < g; ++n) {
            const double shrunk = std::copysign(std::max(std::abs(y(n)) - mu * delta(n), 0.0), y(n));
            out(n) = std::clamp(shrunk, -q_bar(n), q_bar(n));
        }
        return out;
    };

    Equilibrium eq;
    eq.method = "prox";
    eq.converged = false;
    Vec q = Vec::Zero(g);
    Vec momentum = q;
    double theta = 1.0;
    for (int it = 0; it < opts.max_iters; ++it) {
        const Vec& point = opts.accelerate ? momentum : q;
        const Vec q_next = prox(point - mu * (h * point + b));
        eq.iterations = it + 1;
        // Fixed-point residual of the prox-gradient map measured at q_next.
        const Vec fp = prox(q_next - mu * (h * q_next + b));
        eq.residual = (fp - q_next).lpNorm<Eigen::Infinity>();
        if (opts.accelerate) {
            const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            momentum = q_next + ((theta - 1.0) / theta_next) * (q_next - q);
            theta = theta_next;
        }
        q = q_next;
        if (eq.residual <= opts.tol) {
            eq.converged = true;
            break;
        }
    }
    if (!eq.converged)
        fail(ErrorCode::MaxIterations, "equilibrium prox solver did not reach tolerance");
    eq.q_eq = q;
    eq.v_eq = model.X_ng() * q + scenario.v_tilde;
    return eq;
}

Equilibrium solve_equilibrium_nonsym(const FeederModel& model, const RuleSet& rules,
                                     const Scenario& scenario, const ProxOptions& opts) {
    check_scenario(model, rules, scenario);
    const auto& rs = rules.nonsym();
    const int g = model.inverter_count();

    // Negative q (absorption) belongs to the "+" branch, positive q to "-".
    Vec c_neg(g), d_neg(g), lo(g), c_pos(g), d_pos(g), hi(g), v_bar(g);
    for (int n = 0; n < g; ++n) {
        const auto& r = rs[static_cast<size_t>(n)];
        c_neg(n) = r.c_p;
        d_neg(n) = r.delta_p;
        lo(n) = r.q_bar_p;
        c_pos(n) = r.c_m;
        d_pos(n) = r.delta_m;
        hi(n) = r.q_bar_m;
        v_bar(n) = r.v_bar;
    }

    const Vec b = model.restrict_g(scenario.v_tilde) - v_bar;
    const double mu = 1.0 / lambda_max(model.X_gg());

    auto prox = [&](const Vec& y) {
        Vec out(g);
        for (int n = 0; n < g; ++n)
            out(n) = prox_piecewise(y(n), mu, c_neg(n), d_neg(n), lo(n), c_pos(n), d_pos(n), hi(n));
        return out;
    };

    Equilibrium eq;
    eq.method = "prox";
    eq.converged = false;
    Vec q = Vec::Zero(g);
    for (int it = 0; it < opts.max_iters; ++it) {
        const Vec q_next = prox(q - mu * (model.X_gg() * q + b));
        eq.iterations = it + 1;
        const Vec fp = prox(q_next - mu * (model.X_gg() * q_next + b));
        eq.residual = (fp - q_next).lpNorm<Eigen::Infinity>();
        q = q_next;
        if (eq.residual <= opts.tol) {
            eq.converged = true;
            break;
        }
    }
    if (!eq.converged)
        fail(ErrorCode::MaxIterations, "non-symmetric equilibrium solver did not reach tolerance");
    eq.q_eq = q;
    eq.v_eq = model.X_ng() * q + scenario.v_tilde;
    return eq;
}

} // namespace vvo
