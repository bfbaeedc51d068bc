#include "designer.hpp"

#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <random>

#include "parallel.hpp"

namespace vvo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double cost_of(const std::vector<Equilibrium>& eqs) {
    double acc = 0.0;
    for (const auto& eq : eqs) acc += (eq.v_eq.array() - 1.0).matrix().squaredNorm();
    return acc / (2.0 * static_cast<double>(eqs.size()));
}

RuleSet rules_from(const Vec& z, const Vec& q_hat, bool nonsymmetric) {
    return nonsymmetric ? from_z_nonsym(z, q_hat) : from_z(z, q_hat);
}

/// Per-scenario gradient contribution (unnormalized).
Vec scenario_gradient(const FeederModel& model, const RuleSet& rules, const Equilibrium& eq) {
    const int g = model.inverter_count();
    const Vec v_g = model.restrict_g(eq.v_eq);
    const Vec d = eq.v_eq.array() - 1.0;
    const Vec w = model.X_ng().transpose() * d;

    Vec dfv(g);
    const bool nonsym = !rules.symmetric();
    std::vector<RulePartials> ps;
    std::vector<NonSymPartials> pns;
    if (nonsym) {
        pns.resize(static_cast<size_t>(g));
        for (int n = 0; n < g; ++n) {
            pns[static_cast<size_t>(n)] = partials_nonsym(rules.nonsym()[static_cast<size_t>(n)], v_g(n));
            dfv(n) = pns[static_cast<size_t>(n)].df_dv;
        }
    } else {
        ps.resize(static_cast<size_t>(g));
        for (int n = 0; n < g; ++n) {
            ps[static_cast<size_t>(n)] = partials(rules.sym()[static_cast<size_t>(n)], v_g(n));
            dfv(n) = ps[static_cast<size_t>(n)].df_dv;
        }
    }

    // Adjoint solve: (I - X_GG D) y = w, the transpose of the implicit
    // sensitivity system (I - D X_GG).
    const Mat a = Mat::Identity(g, g) - model.X_gg() * dfv.asDiagonal();
    Eigen::PartialPivLU<Mat> lu(a);
    const Vec y = lu.solve(w);
    if ((a * y - w).lpNorm<Eigen::Infinity>() >
        1e-6 * std::max(1.0, w.lpNorm<Eigen::Infinity>()))
        fail(ErrorCode::SingularSystem, "implicit sensitivity system is numerically singular");

    if (nonsym) {
        Vec grad = Vec::Zero(7 * g);
        for (int n = 0; n < g; ++n) {
            const auto& p = pns[static_cast<size_t>(n)];
            grad(n) = p.df_dvbar * y(n);
            grad(g + n) = p.df_ddelta_p * y(n);
            grad(2 * g + n) = p.df_dsigma_p * y(n);
            grad(3 * g + n) = p.df_dc_p * y(n);
            grad(4 * g + n) = p.df_ddelta_m * y(n);
            grad(5 * g + n) = p.df_dsigma_m * y(n);
            grad(6 * g + n) = p.df_dc_m * y(n);
        }
        return grad;
    }
    Vec grad = Vec::Zero(4 * g);
    for (int n = 0; n < g; ++n) {
        const auto& p = ps[static_cast<size_t>(n)];
        grad(n) = p.df_dvbar * y(n);
        grad(g + n) = p.df_ddelta * y(n);
        grad(2 * g + n) = p.df_dsigma * y(n);
        grad(3 * g + n) = p.df_dc * y(n);
    }
    return grad;
}

struct RunOutcome {
    Vec z;
    double cost = 0.0;
    std::vector<double> trajectory;
    std::vector<Vec> iterates;
    std::vector<Equilibrium> equilibria;
    int iterations = 0;
    bool converged = false;
    double wall_projection = 0.0;
    double wall_equilibrium = 0.0;
};

} // namespace

std::vector<Equilibrium> batch_equilibria(const FeederModel& model, const RuleSet& rules,
                                          const ScenarioSet& scenarios, const ProxOptions& prox,
                                          int workers) {
    if (scenarios.count() == 0) fail(ErrorCode::InvalidArgument, "scenario set is empty");
    std::vector<Equilibrium> eqs(static_cast<size_t>(scenarios.count()));
    const bool sym = rules.symmetric();
    parallel_for(scenarios.count(), workers, [&](int s) {
        eqs[static_cast<size_t>(s)] = sym ? solve_equilibrium_qp(model, rules, scenarios[s], prox)
                                          : solve_equilibrium_nonsym(model, rules, scenarios[s], prox);
    });
    return eqs;
}

double cost(const FeederModel& model, const RuleSet& rules, const ScenarioSet& scenarios,
            const ProxOptions& prox, int workers) {
    return cost_of(batch_equilibria(model, rules, scenarios, prox, workers));
}

Vec gradient_at(const FeederModel& model, const RuleSet& rules,
                const std::vector<Equilibrium>& equilibria, const ScenarioSet& scenarios,
                int workers) {
    if (static_cast<int>(equilibria.size()) != scenarios.count())
        fail(ErrorCode::DimensionMismatch, "one equilibrium per scenario required");
    const int s_count = scenarios.count();
    std::vector<Vec> parts(static_cast<size_t>(s_count));
    parallel_for(s_count, workers, [&](int s) {
        parts[static_cast<size_t>(s)] = scenario_gradient(model, rules, equilibria[static_cast<size_t>(s)]);
    });
    Vec g = Vec::Zero(parts[0].size());
    for (const auto& part : parts) g += part;
    return g / static_cast<double>(s_count);
}

Vec gradient(const FeederModel& model, const RuleSet& rules, const ScenarioSet& scenarios,
             const ProxOptions& prox, int workers) {
    return gradient_at(model, rules, batch_equilibria(model, rules, scenarios, prox, workers),
                       scenarios, workers);
}

DesignReport design(const FeederModel& model, const ScenarioSet& scenarios,
                    const DesignConfig& config) {
    const auto t_total = Clock::now();
    if (scenarios.count() == 0) fail(ErrorCode::InvalidArgument, "scenario set is empty");
    if (config.step <= 0.0) fail(ErrorCode::InvalidArgument, "step size must be positive");
    if (config.eps <= 0.0 || config.eps >= 1.0)
        fail(ErrorCode::InvalidArgument, "design requires a margin eps in (0, 1)");
    if (config.max_iters < 1)
        fail(ErrorCode::InvalidArgument, "max_iters must be at least 1");
    if (config.multistart < 1)
        fail(ErrorCode::InvalidArgument, "multistart must be at least 1");
    const int workers = resolve_workers(config.workers);

    const FeasibleSetSpec spec =
        config.nonsymmetric ? FeasibleSetSpec::build_nonsym(model.X_gg(), model.q_hat(), config.eps)
                            : FeasibleSetSpec::build(model.X_gg(), model.q_hat(), config.eps);
    const int g = spec.inverter_count();
    const int dim = spec.dim();

    auto run_from = [&](const Vec& start) {
        RunOutcome run;
        Projector projector(spec);

        auto t0 = Clock::now();
        run.z = projector.project(start);
        run.wall_projection += seconds_since(t0);

        RuleSet rules = rules_from(run.z, model.q_hat(), config.nonsymmetric);
        t0 = Clock::now();
        run.equilibria = batch_equilibria(model, rules, scenarios, config.prox, workers);
        run.wall_equilibrium += seconds_since(t0);
        run.cost = cost_of(run.equilibria);
        run.trajectory.push_back(run.cost);
        run.iterates.push_back(run.z);

        for (int it = 0; it < config.max_iters; ++it) {
            run.iterations = it + 1;
            const Vec grad = gradient_at(model, rules, run.equilibria, scenarios, workers);

            double mu = config.step;
            Vec z_next;
            std::vector<Equilibrium> eq_next;
            double f_next = 0.0;
            bool descended = false;
            for (int bt = 0; bt <= config.max_backtracks; ++bt) {
                t0 = Clock::now();
                z_next = projector.project(run.z - mu * grad);
                run.wall_projection += seconds_since(t0);
                const RuleSet cand = rules_from(z_next, model.q_hat(), config.nonsymmetric);
                t0 = Clock::now();
                eq_next = batch_equilibria(model, cand, scenarios, config.prox, workers);
                run.wall_equilibrium += seconds_since(t0);
                f_next = cost_of(eq_next);
                if (!config.backtracking || f_next <= run.cost) {
                    descended = true;
                    rules = cand;
                    break;
                }
                mu /= 2.0;
            }
            if (!descended) {
                // No decrease along the gradient at the smallest step: treat
                // as stationary.
                run.converged = true;
                break;
            }
            const double f_prev = run.cost;
            run.z = z_next;
            run.cost = f_next;
            run.equilibria = std::move(eq_next);
            run.trajectory.push_back(run.cost);
            run.iterates.push_back(run.z);
            if (run.cost < config.cost_floor) {
                run.converged = true;
                break;
            }
            if (std::abs(f_next - f_prev) / f_prev <= config.rel_tol) {
                run.converged = true;
                break;
            }
        }
        return run;
    };

    // Seed list: the origin projection (or the configured start), then
    // projected random draws.
    std::vector<Vec> starts;
    starts.push_back(config.z_init ? *config.z_init : Vec::Zero(dim));
    std::mt19937 rng(config.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int k = 1; k < config.multistart; ++k) {
        Vec draw(dim);
        for (int n = 0; n < g; ++n) {
            draw(n) = 0.95 + 0.10 * uni(rng);
            for (int b = 0; b < spec.branches; ++b) {
                draw((1 + 3 * b) * g + n) = 0.03 * uni(rng);
                draw((2 + 3 * b) * g + n) = 0.02 + 0.16 * uni(rng);
                draw((3 + 3 * b) * g + n) = spec.c_lower(n) * (1.0 + 2.0 * uni(rng));
            }
        }
        starts.push_back(draw);
    }

    RunOutcome best;
    bool have_best = false;
    for (const auto& start : starts) {
        RunOutcome run = run_from(start);
        if (!have_best || run.cost < best.cost) {
            best = std::move(run);
            have_best = true;
        }
    }

    DesignReport report;
    report.z = best.z;
    report.cost_trajectory = std::move(best.trajectory);
    report.iterates = std::move(best.iterates);
    report.equilibria = std::move(best.equilibria);
    report.final_cost = best.cost;
    report.iterations = best.iterations;
    report.converged = best.converged;
    report.wall_projection_sec = best.wall_projection;
    report.wall_equilibrium_sec = best.wall_equilibrium;

    const RuleSet final_rules = rules_from(report.z, model.q_hat(), config.nonsymmetric);
    report.stability = full_check(model.X_gg(), final_rules.alphas(), config.eps);
    {
        Projector projector(spec);
        const Vec grad = gradient_at(model, final_rules, report.equilibria, scenarios, workers);
        const Vec station = projector.project(report.z - config.step * grad);
        report.stationarity = (report.z - station).lpNorm<Eigen::Infinity>();
    }
    report.wall_total_sec = seconds_since(t_total);
    return report;
}

} // namespace vvo
