// voltvar — design, check and benchmark IEEE-1547 Volt/VAR curves on radial
// feeders. Thin shell over the C API: every computation goes through
// voltvar/voltvar.h; this file only parses flags and moves bytes.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "voltvar/voltvar.h"

namespace {

template <typename T, void (*FreeFn)(T*)>
struct Handle {
    T* ptr = nullptr;
    ~Handle() {
        if (ptr) FreeFn(ptr);
    }
    T** slot() { return &ptr; }
    operator T*() const { return ptr; }
};

using FeederHandle = Handle<vv_feeder, vv_feeder_free>;
using ScenariosHandle = Handle<vv_scenarios, vv_scenarios_free>;
using RulesHandle = Handle<vv_rules, vv_rules_free>;

struct OwnedString {
    char* s = nullptr;
    ~OwnedString() { vv_string_free(s); }
    char** slot() { return &s; }
    const char* view() const { return s ? s : ""; }
};

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitUnstable = 4;

int exit_for(vv_status status) {
    switch (status) {
        case VV_OK:
            return 0;
        case VV_ERR_VALIDATION:
        case VV_ERR_IO:
            return kExitValidation;
        case VV_ERR_SOLVER:
        case VV_ERR_INTERNAL:
            return kExitSolver;
    }
    return kExitSolver;
}

/// Print the library error and translate the status to a process exit code.
int report_failure(const char* verb, vv_status status) {
    std::cerr << "voltvar: " << verb << " failed: " << vv_last_error() << "\n";
    return exit_for(status);
}

/// Empty path means stdout; writing is the CLI's only direct file I/O.
int write_output(const std::string& path, const char* text) {
    if (path.empty()) {
        std::cout << text;
        return 0;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "voltvar: cannot open '" << path << "' for writing\n";
        return kExitValidation;
    }
    out << text;
    if (!out) {
        std::cerr << "voltvar: write to '" << path << "' failed\n";
        return kExitValidation;
    }
    return 0;
}

int read_input(const std::string& path, std::string& text) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "voltvar: cannot open '" << path << "' for reading\n";
        return kExitValidation;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    return 0;
}

std::string fmt(double x) {
    std::ostringstream ss;
    ss << std::setprecision(17) << x;
    return ss.str();
}

int load_feeder(const std::string& path, FeederHandle& feeder) {
    const vv_status rc = vv_feeder_load_json(path.c_str(), feeder.slot());
    return rc == VV_OK ? 0 : report_failure("loading feeder", rc);
}

int load_scenarios(const vv_feeder* feeder, const std::string& path, ScenariosHandle& scenarios) {
    const vv_status rc = vv_scenarios_load_csv(feeder, path.c_str(), scenarios.slot());
    return rc == VV_OK ? 0 : report_failure("loading scenarios", rc);
}

/// Load rules from --rules when given, otherwise fall back to the IEEE
/// default curve.
int load_rules(const vv_feeder* feeder, const std::string& path, RulesHandle& rules) {
    const vv_status rc = path.empty() ? vv_rules_defaults(feeder, rules.slot())
                                      : vv_rules_load_json(feeder, path.c_str(), rules.slot());
    return rc == VV_OK ? 0 : report_failure("loading rules", rc);
}

struct DesignArgs {
    std::string feeder, scenarios, out, report, cost_csv;
    double eps = 0.01, step = 0.1, rel_tol = 1e-6;
    int max_iters = 1000, multistart = 1, workers = 0;
    unsigned seed = 1;
    bool nonsymmetric = false, no_backtracking = false;
};

int cmd_design(const DesignArgs& args) {
    FeederHandle feeder;
    if (int rc = load_feeder(args.feeder, feeder)) return rc;
    ScenariosHandle scenarios;
    if (int rc = load_scenarios(feeder, args.scenarios, scenarios)) return rc;

    std::ostringstream config;
    config << "{\"eps\":" << fmt(args.eps) << ",\"step\":" << fmt(args.step)
           << ",\"rel_tol\":" << fmt(args.rel_tol) << ",\"max_iters\":" << args.max_iters
           << ",\"multistart\":" << args.multistart << ",\"seed\":" << args.seed
           << ",\"workers\":" << args.workers
           << ",\"nonsymmetric\":" << (args.nonsymmetric ? "true" : "false")
           << ",\"backtracking\":" << (args.no_backtracking ? "false" : "true") << "}";

    OwnedString report;
    RulesHandle rules;
    const vv_status rc = vv_design(feeder, scenarios, config.str().c_str(), report.slot(),
                                   rules.slot());
    if (rc != VV_OK) return report_failure("design", rc);

    OwnedString rules_json;
    const vv_status rj = vv_rules_to_json(feeder, rules, rules_json.slot());
    if (rj != VV_OK) return report_failure("serializing rules", rj);
    if (int wc = write_output(args.out, rules_json.view())) return wc;
    if (!args.report.empty())
        if (int wc = write_output(args.report, report.view())) return wc;
    if (!args.cost_csv.empty()) {
        // Pull the accepted-iterate costs back out of the report JSON.
        const std::string text = report.view();
        const auto key = text.find("\"cost_trajectory\"");
        const auto open = text.find('[', key);
        const auto close = text.find(']', open);
        if (key == std::string::npos || open == std::string::npos || close == std::string::npos) {
            std::cerr << "voltvar: report JSON is missing cost_trajectory\n";
            return kExitSolver;
        }
        std::string csv = "iteration,cost\n";
        std::istringstream items(text.substr(open + 1, close - open - 1));
        std::string item;
        for (int i = 0; std::getline(items, item, ','); ++i) {
            const auto a = item.find_first_not_of(" \n\r\t");
            const auto b = item.find_last_not_of(" \n\r\t");
            if (a == std::string::npos) continue;
            csv += std::to_string(i) + "," + item.substr(a, b - a + 1) + "\n";
        }
        if (int wc = write_output(args.cost_csv, csv.c_str())) return wc;
    }
    return 0;
}

struct SimulateArgs {
    std::string feeder, rules, scenarios, out, eq_json;
    int scenario = 0, max_steps = 0;
    double tol = 0.0;
};

int cmd_simulate(const SimulateArgs& args) {
    FeederHandle feeder;
    if (int rc = load_feeder(args.feeder, feeder)) return rc;
    ScenariosHandle scenarios;
    if (int rc = load_scenarios(feeder, args.scenarios, scenarios)) return rc;
    RulesHandle rules;
    if (int rc = load_rules(feeder, args.rules, rules)) return rc;

    OwnedString csv, eq;
    int converged = 0;
    const vv_status rc = vv_simulate(feeder, rules, scenarios, args.scenario, args.max_steps,
                                     args.tol, csv.slot(), eq.slot(), &converged);
    if (rc != VV_OK) return report_failure("simulate", rc);
    if (int wc = write_output(args.out, csv.view())) return wc;
    if (!args.eq_json.empty())
        if (int wc = write_output(args.eq_json, eq.view())) return wc;
    if (!converged) {
        std::cerr << "voltvar: dynamics did not settle within the step limit"
                     " (unstable rules or too-tight tolerance)\n";
        return kExitSolver;
    }
    return 0;
}

struct CompareArgs {
    std::string feeder, scenarios, rules, out, voltages;
    double eps = 0.01;
    int workers = 0;
};

int cmd_compare(const CompareArgs& args) {
    FeederHandle feeder;
    if (int rc = load_feeder(args.feeder, feeder)) return rc;
    ScenariosHandle scenarios;
    if (int rc = load_scenarios(feeder, args.scenarios, scenarios)) return rc;
    RulesHandle rules;
    if (!args.rules.empty()) {
        const vv_status rc = vv_rules_load_json(feeder, args.rules.c_str(), rules.slot());
        if (rc != VV_OK) return report_failure("loading rules", rc);
    }

    OwnedString table, voltages;
    const vv_status rc = vv_compare(feeder, scenarios, rules, args.eps, args.workers,
                                    table.slot(),
                                    args.voltages.empty() ? nullptr : voltages.slot());
    if (rc != VV_OK) return report_failure("compare", rc);
    if (int wc = write_output(args.out, table.view())) return wc;
    if (!args.voltages.empty())
        if (int wc = write_output(args.voltages, voltages.view())) return wc;
    return 0;
}

struct StabilityArgs {
    std::string feeder, rules, out;
    double eps = 0.0;
};

int cmd_stability(const StabilityArgs& args) {
    FeederHandle feeder;
    if (int rc = load_feeder(args.feeder, feeder)) return rc;
    RulesHandle rules;
    if (int rc = load_rules(feeder, args.rules, rules)) return rc;

    OwnedString json;
    int stable = 0;
    const vv_status rc = vv_stability_check(feeder, rules, args.eps, json.slot(), &stable);
    if (rc != VV_OK) return report_failure("stability-check", rc);
    if (int wc = write_output(args.out, json.view())) return wc;
    if (!stable) {
        std::cerr << "voltvar: rules are NOT certified stable on this feeder\n";
        return kExitUnstable;
    }
    return 0;
}

struct ValidateArgs {
    std::string feeder, scenarios, rules, out;
    double tolerance = 0.0;
};

int cmd_validate(const ValidateArgs& args) {
    FeederHandle feeder;
    if (int rc = load_feeder(args.feeder, feeder)) return rc;
    ScenariosHandle scenarios;
    if (int rc = load_scenarios(feeder, args.scenarios, scenarios)) return rc;
    RulesHandle rules;
    if (!args.rules.empty()) {
        const vv_status rc = vv_rules_load_json(feeder, args.rules.c_str(), rules.slot());
        if (rc != VV_OK) return report_failure("loading rules", rc);
    }

    OwnedString csv;
    double max_error = 0.0;
    const vv_status rc = vv_validate_linearization(feeder, rules, scenarios, csv.slot(),
                                                   &max_error);
    if (rc != VV_OK) return report_failure("validate-linearization", rc);
    if (int wc = write_output(args.out, csv.view())) return wc;
    std::cerr << "voltvar: max |v_lin - v_ac| = " << fmt(max_error) << " pu\n";
    if (args.tolerance > 0.0 && max_error > args.tolerance) {
        std::cerr << "voltvar: linearization error exceeds --tolerance " << fmt(args.tolerance)
                  << "\n";
        return kExitSolver;
    }
    return 0;
}

struct ScenariosArgs {
    std::string input, out;
    int window = 1;
};

int cmd_scenarios(const ScenariosArgs& args) {
    std::string text;
    if (int rc = read_input(args.input, text)) return rc;
    OwnedString csv;
    int windows = 0, partial = 0;
    const vv_status rc = vv_scenarios_average_csv(text.c_str(), args.window, csv.slot(),
                                                  &windows, &partial);
    if (rc != VV_OK) return report_failure("scenarios", rc);
    if (int wc = write_output(args.out, csv.view())) return wc;
    std::cerr << "voltvar: " << windows << " scenario(s) emitted";
    if (partial) std::cerr << "; trailing window was shorter than " << args.window << " rows";
    std::cerr << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string feeder, rules, scenarios, out;
    double eps = 0.01;
    int workers = 0;
};

int cmd_evaluate(const EvaluateArgs& args) {
    FeederHandle feeder;
    if (int rc = load_feeder(args.feeder, feeder)) return rc;
    ScenariosHandle scenarios;
    if (int rc = load_scenarios(feeder, args.scenarios, scenarios)) return rc;
    RulesHandle rules;
    if (int rc = load_rules(feeder, args.rules, rules)) return rc;

    OwnedString json;
    const vv_status rc = vv_evaluate(feeder, rules, scenarios, args.eps, args.workers,
                                     json.slot());
    if (rc != VV_OK) return report_failure("evaluate", rc);
    return write_output(args.out, json.view());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Design, certify and benchmark per-bus Volt/VAR control curves for radial\n"
        "distribution feeders. Exit codes: 0 success, 2 validation error, 3 solver\n"
        "failure, 4 instability detected. VOLTVAR_WORKERS sets the default worker\n"
        "count where --workers is 0."};
    app.set_version_flag("--version", std::string(vv_version()));
    app.require_subcommand(1);

    DesignArgs design;
    auto* sub_design = app.add_subcommand(
        "design", "Optimize stable Volt/VAR curves over a scenario set");
    sub_design->add_option("--feeder", design.feeder, "Feeder JSON")->required();
    sub_design->add_option("--scenarios", design.scenarios, "Scenario CSV")->required();
    sub_design->add_option("--out", design.out, "Rules JSON output (default stdout)");
    sub_design->add_option("--report", design.report, "Design report JSON output");
    sub_design->add_option("--cost-csv", design.cost_csv, "Per-iteration cost CSV output");
    sub_design->add_option("--eps", design.eps, "Stability margin in (0,1)");
    sub_design->add_option("--step", design.step, "Initial gradient step");
    sub_design->add_option("--rel-tol", design.rel_tol, "Relative cost-change stop");
    sub_design->add_option("--max-iters", design.max_iters, "Iteration cap");
    sub_design->add_option("--multistart", design.multistart, "Number of starts");
    sub_design->add_option("--seed", design.seed, "Random seed for extra starts");
    sub_design->add_option("--workers", design.workers, "Worker threads (0 = env/serial)");
    sub_design->add_flag("--nonsymmetric", design.nonsymmetric,
                         "Two-branch curves (independent sides)");
    sub_design->add_flag("--no-backtracking", design.no_backtracking,
                         "Disable the line search");

    SimulateArgs simulate;
    auto* sub_simulate = app.add_subcommand(
        "simulate", "Run the Volt/VAR dynamics on one scenario");
    sub_simulate->add_option("--feeder", simulate.feeder, "Feeder JSON")->required();
    sub_simulate->add_option("--scenarios", simulate.scenarios, "Scenario CSV")->required();
    sub_simulate->add_option("--rules", simulate.rules, "Rules JSON (default: IEEE defaults)");
    sub_simulate->add_option("--scenario", simulate.scenario, "Scenario index (default 0)");
    sub_simulate->add_option("--max-steps", simulate.max_steps, "Step cap (0 = default)");
    sub_simulate->add_option("--tol", simulate.tol, "Settle tolerance (0 = default)");
    sub_simulate->add_option("--out", simulate.out, "Trajectory CSV output (default stdout)");
    sub_simulate->add_option("--eq-json", simulate.eq_json, "Terminal state JSON output");

    CompareArgs compare;
    auto* sub_compare = app.add_subcommand(
        "compare", "Benchmark dispatch schemes a1-a4 (and optional designed rules)");
    sub_compare->add_option("--feeder", compare.feeder, "Feeder JSON")->required();
    sub_compare->add_option("--scenarios", compare.scenarios, "Scenario CSV")->required();
    sub_compare->add_option("--rules", compare.rules, "Designed rules JSON to include");
    sub_compare->add_option("--eps", compare.eps, "Margin for stability verdicts");
    sub_compare->add_option("--workers", compare.workers, "Worker threads (0 = env/serial)");
    sub_compare->add_option("--out", compare.out, "Table CSV output (default stdout)");
    sub_compare->add_option("--voltages", compare.voltages, "Per-scheme voltage CSV output");

    StabilityArgs stability;
    auto* sub_stability = app.add_subcommand(
        "stability-check", "Certify closed-loop stability of a rule set");
    sub_stability->add_option("--feeder", stability.feeder, "Feeder JSON")->required();
    sub_stability->add_option("--rules", stability.rules, "Rules JSON (default: IEEE defaults)");
    sub_stability->add_option("--eps", stability.eps, "Required margin (default 0)");
    sub_stability->add_option("--out", stability.out, "Report JSON output (default stdout)");

    ValidateArgs validate;
    auto* sub_validate = app.add_subcommand(
        "validate-linearization", "Compare the linear model against AC power flow");
    sub_validate->add_option("--feeder", validate.feeder, "Feeder JSON")->required();
    sub_validate->add_option("--scenarios", validate.scenarios, "Scenario CSV")->required();
    sub_validate->add_option("--rules", validate.rules,
                             "Rules JSON (omit for unit-power-factor comparison)");
    sub_validate->add_option("--out", validate.out, "Error CSV output (default stdout)");
    sub_validate->add_option("--tolerance", validate.tolerance,
                             "Fail when max error exceeds this (0 = report only)");

    ScenariosArgs scen;
    auto* sub_scenarios = app.add_subcommand(
        "scenarios", "Average a high-resolution injection CSV into control windows");
    sub_scenarios->add_option("--input", scen.input, "High-resolution scenario CSV")->required();
    sub_scenarios->add_option("--window", scen.window, "Rows per control window")->required();
    sub_scenarios->add_option("--out", scen.out, "Averaged CSV output (default stdout)");

    EvaluateArgs evaluate;
    auto* sub_evaluate = app.add_subcommand(
        "evaluate", "Evaluate a rule set on a (typically out-of-sample) scenario set");
    sub_evaluate->add_option("--feeder", evaluate.feeder, "Feeder JSON")->required();
    sub_evaluate->add_option("--scenarios", evaluate.scenarios, "Scenario CSV")->required();
    sub_evaluate->add_option("--rules", evaluate.rules, "Rules JSON (default: IEEE defaults)");
    sub_evaluate->add_option("--eps", evaluate.eps, "Margin for the stability verdict");
    sub_evaluate->add_option("--workers", evaluate.workers, "Worker threads (0 = env/serial)");
    sub_evaluate->add_option("--out", evaluate.out, "Summary JSON output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    if (sub_design->parsed()) return cmd_design(design);
    if (sub_simulate->parsed()) return cmd_simulate(simulate);
    if (sub_compare->parsed()) return cmd_compare(compare);
    if (sub_stability->parsed()) return cmd_stability(stability);
    if (sub_validate->parsed()) return cmd_validate(validate);
    if (sub_scenarios->parsed()) return cmd_scenarios(scen);
    if (sub_evaluate->parsed()) return cmd_evaluate(evaluate);
    return kExitValidation;
}
