#include "voltvar/voltvar.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "acpf.hpp"
#include "benchmarks.hpp"
#include "designer.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "feeder.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "rules.hpp"
#include "stability.hpp"

using nlohmann::json;

struct vv_feeder {
    vvo::FeederModel model;
    explicit vv_feeder(vvo::FeederModel m) : model(std::move(m)) {}
};

struct vv_scenarios {
    vvo::ScenarioSet set;
};

struct vv_rules {
    vvo::RuleSet rules;
};

namespace {

thread_local std::string g_last_error;

vv_status map_code(vvo::ErrorCode code) {
    using vvo::ErrorCode;
    switch (code) {
        case ErrorCode::IoError:
            return VV_ERR_IO;
        case ErrorCode::NotConverged:
        case ErrorCode::MaxIterations:
        case ErrorCode::SingularSystem:
        case ErrorCode::SolverStalled:
        case ErrorCode::Diverged:
            return VV_ERR_SOLVER;
        case ErrorCode::InvalidArgument:
        case ErrorCode::CycleDetected:
        case ErrorCode::NonPositiveReactance:
        case ErrorCode::DisconnectedBus:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::NonPositiveC:
        case ErrorCode::Infeasible:
        case ErrorCode::ParseError:
            return VV_ERR_VALIDATION;
    }
    return VV_ERR_INTERNAL;
}

template <typename Fn>
vv_status guard(Fn&& fn) {
    g_last_error.clear();
    try {
        return fn();
    } catch (const vvo::Error& e) {
        g_last_error = std::string(vvo::error_code_name(e.code())) + ": " + e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VV_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return VV_ERR_INTERNAL;
    }
}

vv_status invalid(const std::string& message) {
    g_last_error = message;
    return VV_ERR_VALIDATION;
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) {
        g_last_error = "out of memory";
        return nullptr;
    }
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

/// Copy a string to the out parameter; VV_ERR_INTERNAL on allocation failure.
vv_status emit(char** out, const std::string& s) {
    if (!out) return VV_OK; // caller did not ask for this output
    char* p = dup_string(s);
    if (!p) return VV_ERR_INTERNAL;
    *out = p;
    return VV_OK;
}

vvo::RuleSet rules_from_z(const vvo::FeederModel& model, const vvo::Vec& z) {
    const long g = model.inverter_count();
    return z.size() == 7 * g ? vvo::from_z_nonsym(z, model.q_hat())
                             : vvo::from_z(z, model.q_hat());
}

vvo::DesignConfig parse_design_config(const char* config_json) {
    vvo::DesignConfig config;
    if (!config_json || !*config_json) return config;
    json doc = json::parse(std::string(config_json), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        vvo::fail(vvo::ErrorCode::ParseError, "design config: expected a JSON object");

    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "eps")
                config.eps = value.get<double>();
            else if (key == "step")
                config.step = value.get<double>();
            else if (key == "rel_tol")
                config.rel_tol = value.get<double>();
            else if (key == "cost_floor")
                config.cost_floor = value.get<double>();
            else if (key == "max_iters")
                config.max_iters = value.get<int>();
            else if (key == "backtracking")
                config.backtracking = value.get<bool>();
            else if (key == "max_backtracks")
                config.max_backtracks = value.get<int>();
            else if (key == "nonsymmetric")
                config.nonsymmetric = value.get<bool>();
            else if (key == "multistart")
                config.multistart = value.get<int>();
            else if (key == "seed")
                config.seed = value.get<unsigned>();
            else if (key == "workers")
                config.workers = value.get<int>();
            else if (key == "prox_tol")
                config.prox.tol = value.get<double>();
            else if (key == "prox_max_iters")
                config.prox.max_iters = value.get<int>();
            else
                vvo::fail(vvo::ErrorCode::ParseError, "design config: unknown key '" + key + "'");
        } catch (const json::exception&) {
            vvo::fail(vvo::ErrorCode::ParseError, "design config: bad value for '" + key + "'");
        }
    }
    return config;
}

} // namespace

extern "C" {

const char* vv_version(void) { return "1.0.0"; }

const char* vv_last_error(void) { return g_last_error.c_str(); }

void vv_string_free(char* s) { std::free(s); }

/* ---- feeder ---------------------------------------------------------- */

vv_status vv_feeder_parse_json(const char* text, vv_feeder** out) {
    if (!text || !out) return invalid("vv_feeder_parse_json: null argument");
    return guard([&] {
        auto handle =
            std::make_unique<vv_feeder>(vvo::FeederModel::build(vvo::io::parse_feeder_json(text)));
        *out = handle.release();
        return VV_OK;
    });
}

vv_status vv_feeder_load_json(const char* path, vv_feeder** out) {
    if (!path || !out) return invalid("vv_feeder_load_json: null argument");
    return guard([&] {
        auto handle =
            std::make_unique<vv_feeder>(vvo::FeederModel::build(vvo::io::load_feeder_json(path)));
        *out = handle.release();
        return VV_OK;
    });
}

void vv_feeder_free(vv_feeder* feeder) { delete feeder; }

int vv_feeder_bus_count(const vv_feeder* feeder) {
    return feeder ? feeder->model.bus_count() : -1;
}

int vv_feeder_inverter_count(const vv_feeder* feeder) {
    return feeder ? feeder->model.inverter_count() : -1;
}

/* ---- scenarios ------------------------------------------------------- */

vv_status vv_scenarios_parse_csv(const vv_feeder* feeder, const char* text, vv_scenarios** out) {
    if (!feeder || !text || !out) return invalid("vv_scenarios_parse_csv: null argument");
    return guard([&] {
        auto handle = std::make_unique<vv_scenarios>();
        handle->set = vvo::io::parse_scenarios_csv(text, feeder->model);
        *out = handle.release();
        return VV_OK;
    });
}

vv_status vv_scenarios_load_csv(const vv_feeder* feeder, const char* path, vv_scenarios** out) {
    if (!feeder || !path || !out) return invalid("vv_scenarios_load_csv: null argument");
    return guard([&] {
        auto handle = std::make_unique<vv_scenarios>();
        handle->set = vvo::io::load_scenarios_csv(path, feeder->model);
        *out = handle.release();
        return VV_OK;
    });
}

void vv_scenarios_free(vv_scenarios* scenarios) { delete scenarios; }

int vv_scenarios_count(const vv_scenarios* scenarios) {
    return scenarios ? scenarios->set.count() : -1;
}

vv_status vv_scenarios_to_csv(const vv_feeder* feeder, const vv_scenarios* scenarios,
                              char** out_csv) {
    if (!feeder || !scenarios || !out_csv) return invalid("vv_scenarios_to_csv: null argument");
    return guard([&] { return emit(out_csv, vvo::io::scenarios_to_csv(feeder->model, scenarios->set)); });
}

vv_status vv_scenarios_average_csv(const char* text, int window, char** out_csv,
                                   int* out_windows, int* out_partial_tail) {
    if (!text || !out_csv) return invalid("vv_scenarios_average_csv: null argument");
    return guard([&] {
        const auto averaged = vvo::io::average_scenarios_csv(text, window);
        const vv_status rc = emit(out_csv, averaged.csv);
        if (rc != VV_OK) return rc;
        if (out_windows) *out_windows = averaged.windows;
        if (out_partial_tail) *out_partial_tail = averaged.partial_tail ? 1 : 0;
        return VV_OK;
    });
}

/* ---- rules ----------------------------------------------------------- */

vv_status vv_rules_parse_json(const vv_feeder* feeder, const char* text, vv_rules** out) {
    if (!feeder || !text || !out) return invalid("vv_rules_parse_json: null argument");
    return guard([&] {
        auto handle = std::make_unique<vv_rules>();
        handle->rules = vvo::io::parse_rules_json(text, feeder->model);
        *out = handle.release();
        return VV_OK;
    });
}

vv_status vv_rules_load_json(const vv_feeder* feeder, const char* path, vv_rules** out) {
    if (!feeder || !path || !out) return invalid("vv_rules_load_json: null argument");
    return guard([&] {
        auto handle = std::make_unique<vv_rules>();
        handle->rules = vvo::io::load_rules_json(path, feeder->model);
        *out = handle.release();
        return VV_OK;
    });
}

vv_status vv_rules_defaults(const vv_feeder* feeder, vv_rules** out) {
    if (!feeder || !out) return invalid("vv_rules_defaults: null argument");
    return guard([&] {
        auto handle = std::make_unique<vv_rules>();
        handle->rules = vvo::RuleSet::defaults_1547(feeder->model.p_bar());
        *out = handle.release();
        return VV_OK;
    });
}

void vv_rules_free(vv_rules* rules) { delete rules; }

vv_status vv_rules_to_json(const vv_feeder* feeder, const vv_rules* rules, char** out_json) {
    if (!feeder || !rules || !out_json) return invalid("vv_rules_to_json: null argument");
    return guard([&] { return emit(out_json, vvo::io::rules_to_json(feeder->model, rules->rules)); });
}

/* ---- analysis -------------------------------------------------------- */

vv_status vv_stability_check(const vv_feeder* feeder, const vv_rules* rules, double eps,
                             char** out_json, int* out_stable) {
    if (!feeder || !rules) return invalid("vv_stability_check: null argument");
    return guard([&] {
        const vvo::StabilityReport report =
            vvo::full_check(feeder->model.X_gg(), rules->rules.alphas(), eps);
        const vv_status rc = emit(out_json, vvo::io::stability_to_json(report));
        if (rc != VV_OK) return rc;
        if (out_stable) *out_stable = report.spectral_ok ? 1 : 0;
        return VV_OK;
    });
}

vv_status vv_design(const vv_feeder* feeder, const vv_scenarios* scenarios,
                    const char* config_json, char** out_report_json, vv_rules** out_rules) {
    if (!feeder || !scenarios) return invalid("vv_design: null argument");
    return guard([&] {
        const vvo::DesignConfig config = parse_design_config(config_json);
        const vvo::DesignReport report = vvo::design(feeder->model, scenarios->set, config);
        const vv_status rc =
            emit(out_report_json, vvo::io::design_report_to_json(feeder->model, report));
        if (rc != VV_OK) return rc;
        if (out_rules) {
            auto handle = std::make_unique<vv_rules>();
            handle->rules = rules_from_z(feeder->model, report.z);
            *out_rules = handle.release();
        }
        return VV_OK;
    });
}

vv_status vv_simulate(const vv_feeder* feeder, const vv_rules* rules,
                      const vv_scenarios* scenarios, int scenario_index, int max_steps,
                      double tol, char** out_csv, char** out_eq_json, int* out_converged) {
    if (!feeder || !rules || !scenarios) return invalid("vv_simulate: null argument");
    if (scenario_index < 0 || scenario_index >= scenarios->set.count())
        return invalid("vv_simulate: scenario index out of range");
    return guard([&] {
        vvo::DynamicsOptions opts;
        if (max_steps > 0) opts.max_steps = max_steps;
        if (tol > 0) opts.tol = tol;
        vvo::Trajectory trajectory;
        const vvo::Equilibrium eq = vvo::simulate_dynamics(
            feeder->model, rules->rules, scenarios->set[scenario_index], opts, &trajectory);
        vv_status rc = emit(out_csv, vvo::io::trajectory_csv(feeder->model, trajectory));
        if (rc != VV_OK) return rc;
        rc = emit(out_eq_json, vvo::io::equilibria_to_json(feeder->model, {eq}));
        if (rc != VV_OK) return rc;
        if (out_converged) *out_converged = eq.converged ? 1 : 0;
        return VV_OK;
    });
}

vv_status vv_equilibria(const vv_feeder* feeder, const vv_rules* rules,
                        const vv_scenarios* scenarios, int workers, char** out_json) {
    if (!feeder || !rules || !scenarios || !out_json)
        return invalid("vv_equilibria: null argument");
    return guard([&] {
        const auto eqs = vvo::batch_equilibria(feeder->model, rules->rules, scenarios->set,
                                               vvo::ProxOptions{}, vvo::resolve_workers(workers));
        return emit(out_json, vvo::io::equilibria_to_json(feeder->model, eqs));
    });
}

vv_status vv_compare(const vv_feeder* feeder, const vv_scenarios* scenarios,
                     const vv_rules* rules, double eps, int workers, char** out_table_csv,
                     char** out_voltages_csv) {
    if (!feeder || !scenarios || !out_table_csv) return invalid("vv_compare: null argument");
    return guard([&] {
        const int w = vvo::resolve_workers(workers);
        std::vector<vvo::BenchmarkResult> results;
        results.push_back(vvo::unit_pf(feeder->model, scenarios->set));
        results.push_back(vvo::per_scenario_optimal(feeder->model, scenarios->set, w));
        results.push_back(vvo::stochastic_optimal(feeder->model, scenarios->set));
        results.push_back(vvo::default_1547(feeder->model, scenarios->set, eps, w));
        if (rules)
            results.push_back(
                vvo::evaluate_rules(feeder->model, rules->rules, scenarios->set, "designed", eps, w));
        vv_status rc = emit(out_table_csv, vvo::io::benchmark_table_csv(results));
        if (rc != VV_OK) return rc;
        if (out_voltages_csv)
            rc = emit(out_voltages_csv,
                      vvo::io::benchmark_voltages_csv(feeder->model, scenarios->set, results));
        return rc;
    });
}

vv_status vv_evaluate(const vv_feeder* feeder, const vv_rules* rules,
                      const vv_scenarios* scenarios, double eps, int workers, char** out_json) {
    if (!feeder || !rules || !scenarios || !out_json) return invalid("vv_evaluate: null argument");
    return guard([&] {
        const vvo::BenchmarkResult result =
            vvo::evaluate_rules(feeder->model, rules->rules, scenarios->set, "designed", eps,
                                vvo::resolve_workers(workers));
        return emit(out_json, vvo::io::benchmark_to_json(result));
    });
}

vv_status vv_validate_linearization(const vv_feeder* feeder, const vv_rules* rules,
                                    const vv_scenarios* scenarios, char** out_csv,
                                    double* out_max_error) {
    if (!feeder || !scenarios || !out_csv)
        return invalid("vv_validate_linearization: null argument");
    return guard([&] {
        const vvo::FeederModel& model = feeder->model;
        const auto& set = scenarios->set.scenarios;
        std::vector<long> ids;
        std::vector<vvo::Vec> v_lin, v_ac;
        double max_error = 0.0;
        for (const auto& sc : set) {
            vvo::Vec lin, ac;
            if (!rules) {
                lin = sc.v_tilde;
                const vvo::AcSolution sol =
                    vvo::solve_ac(model, vvo::Vec(sc.p_g - sc.p_l), vvo::Vec(-sc.q_l));
                ac = sol.v_mag;
            } else {
                const vvo::Equilibrium lin_eq = rules->rules.symmetric()
                                                    ? vvo::solve_equilibrium_qp(model, rules->rules, sc)
                                                    : vvo::solve_equilibrium_nonsym(model, rules->rules, sc);
                lin = lin_eq.v_eq;
                const vvo::Equilibrium ac_eq =
                    vvo::simulate_dynamics_ac(model, rules->rules, sc);
                if (!ac_eq.converged)
                    vvo::fail(vvo::ErrorCode::NotConverged,
                              "AC Volt/VAR dynamics did not settle on scenario " +
                                  std::to_string(sc.id));
                ac = ac_eq.v_eq;
            }
            max_error = std::max(max_error, (lin - ac).cwiseAbs().maxCoeff());
            ids.push_back(sc.id);
            v_lin.push_back(std::move(lin));
            v_ac.push_back(std::move(ac));
        }
        const vv_status rc = emit(out_csv, vvo::io::linearization_csv(model, ids, v_lin, v_ac));
        if (rc != VV_OK) return rc;
        if (out_max_error) *out_max_error = max_error;
        return VV_OK;
    });
}

} // extern "C"
