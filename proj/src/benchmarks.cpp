#include "benchmarks.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "parallel.hpp"

namespace vvo {

namespace {

void fill_stats(BenchmarkResult& res) {
    res.vdm = vdm(res.voltages);
    res.max_deviation = 0.0;
    res.band_violations = 0;
    for (const auto& v : res.voltages) {
        for (int n = 0; n < v.size(); ++n) {
            const double dev = std::abs(v(n) - 1.0);
            res.max_deviation = std::max(res.max_deviation, dev);
            if (dev > 0.05) ++res.band_violations;
        }
    }
}

} // namespace

double vdm(const std::vector<Vec>& voltages) {
    if (voltages.empty()) fail(ErrorCode::InvalidArgument, "VDM needs at least one scenario");
    double acc = 0.0;
    for (const auto& v : voltages) acc += (v.array() - 1.0).matrix().squaredNorm();
    return acc / (2.0 * static_cast<double>(voltages.size()));
}

Vec box_least_squares(const Mat& x_ng, const Vec& r, const Vec& q_hat, double tol,
                      int max_iters) {
    if (x_ng.cols() != q_hat.size() || x_ng.rows() != r.size())
        fail(ErrorCode::DimensionMismatch, "least-squares blocks disagree in size");
    const Mat gram = x_ng.transpose() * x_ng;
    Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
    const double lip = 2.0 * es.eigenvalues().maxCoeff();
    if (lip <= 0.0) fail(ErrorCode::InvalidArgument, "sensitivity block has no column rank");
    const double mu = 1.0 / lip;

    auto clip = [&](Vec q) {
        for (int n = 0; n < q.size(); ++n) q(n) = std::clamp(q(n), -q_hat(n), q_hat(n));
        return q;
    };
    const Vec xtr = x_ng.transpose() * r;

    // Accelerated projected gradient with function-value restart; plain
    // projected gradient needs O(kappa) iterations and exhausts the budget
    // on ill-conditioned sensitivity blocks.
    auto value = [&](const Vec& q) { return q.dot(gram * q) + 2.0 * q.dot(xtr); };
    Vec q = Vec::Zero(q_hat.size());
    Vec y = q;
    double t = 1.0;
    double f_prev = value(q);
    for (int it = 0; it < max_iters; ++it) {
        Vec q_next = clip(y - mu * 2.0 * (gram * y + xtr));
        double f_next = value(q_next);
        if (f_next > f_prev) {
            // Momentum overshot: take a plain step from the last accepted
            // point instead and rebuild momentum from scratch.
            q_next = clip(q - mu * 2.0 * (gram * q + xtr));
            f_next = value(q_next);
            t = 1.0;
        }
        const double res = (q_next - q).lpNorm<Eigen::Infinity>();
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = q_next + ((t - 1.0) / t_next) * (q_next - q);
        q = q_next;
        t = t_next;
        f_prev = f_next;
        if (res <= tol) return q;
    }
    fail(ErrorCode::MaxIterations, "box least squares did not reach tolerance");
}

BenchmarkResult unit_pf(const FeederModel& model, const ScenarioSet& scenarios) {
    if (scenarios.count() == 0) fail(ErrorCode::InvalidArgument, "scenario set is empty");
    BenchmarkResult res;
    res.scheme = "a1";
    for (int s = 0; s < scenarios.count(); ++s) {
        res.voltages.push_back(scenarios[s].v_tilde);
        res.dispatches.push_back(Vec::Zero(model.inverter_count()));
    }
    fill_stats(res);
    return res;
}

BenchmarkResult per_scenario_optimal(const FeederModel& model, const ScenarioSet& scenarios,
                                     int workers) {
    if (scenarios.count() == 0) fail(ErrorCode::InvalidArgument, "scenario set is empty");
    BenchmarkResult res;
    res.scheme = "a2";
    res.voltages.resize(static_cast<size_t>(scenarios.count()));
    res.dispatches.resize(static_cast<size_t>(scenarios.count()));
    parallel_for(scenarios.count(), workers, [&](int s) {
        const Vec r = scenarios[s].v_tilde.array() - 1.0;
        const Vec q = box_least_squares(model.X_ng(), r, model.q_hat());
        res.dispatches[static_cast<size_t>(s)] = q;
        res.voltages[static_cast<size_t>(s)] = model.X_ng() * q + scenarios[s].v_tilde;
    });
    fill_stats(res);
    return res;
}

BenchmarkResult stochastic_optimal(const FeederModel& model, const ScenarioSet& scenarios) {
    if (scenarios.count() == 0) fail(ErrorCode::InvalidArgument, "scenario set is empty");
    // The summed objective expands into the objective at the scenario-mean
    // grid conditions plus a q-independent spread term, so one solve on the
    // mean is exact.
    Vec mean = Vec::Zero(model.bus_count());
    for (int s = 0; s < scenarios.count(); ++s) mean += scenarios[s].v_tilde;
    mean /= static_cast<double>(scenarios.count());

    const Vec q = box_least_squares(model.X_ng(), Vec(mean.array() - 1.0), model.q_hat());

    BenchmarkResult res;
    res.scheme = "a3";
    for (int s = 0; s < scenarios.count(); ++s) {
        res.dispatches.push_back(q);
        res.voltages.push_back(model.X_ng() * q + scenarios[s].v_tilde);
    }
    fill_stats(res);
    return res;
}

BenchmarkResult evaluate_rules(const FeederModel& model, const RuleSet& rules,
                               const ScenarioSet& scenarios, const std::string& tag, double eps,
                               int workers) {
    if (scenarios.count() == 0) fail(ErrorCode::InvalidArgument, "scenario set is empty");
    BenchmarkResult res;
    res.scheme = tag;
    res.voltages.resize(static_cast<size_t>(scenarios.count()));
    res.dispatches.resize(static_cast<size_t>(scenarios.count()));
    const bool sym = rules.symmetric();
    parallel_for(scenarios.count(), workers, [&](int s) {
        const Equilibrium eq = sym ? solve_equilibrium_qp(model, rules, scenarios[s])
                                   : solve_equilibrium_nonsym(model, rules, scenarios[s]);
        res.dispatches[static_cast<size_t>(s)] = eq.q_eq;
        res.voltages[static_cast<size_t>(s)] = eq.v_eq;
    });
    res.stability = full_check(model.X_gg(), rules.alphas(), eps);
    fill_stats(res);
    return res;
}

BenchmarkResult default_1547(const FeederModel& model, const ScenarioSet& scenarios, double eps,
                             int workers) {
    const RuleSet defaults = RuleSet::defaults_1547(model.p_bar());
    BenchmarkResult res = evaluate_rules(model, defaults, scenarios, "a4", eps, workers);
    return res;
}

} // namespace vvo
