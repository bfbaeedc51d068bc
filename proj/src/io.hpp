#pragma once

#include <string>
#include <vector>

#include "benchmarks.hpp"
#include "designer.hpp"
#include "equilibrium.hpp"
#include "feeder.hpp"
#include "rules.hpp"
#include "stability.hpp"

namespace vvo::io {

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// Feeder JSON: {v0, buses:[{id, parent, r, x}], inverters:[ids],
/// q_hat:[...], p_bar:[...]}. Bus ids are positive and unique; parent 0
/// denotes the substation.
FeederTopology parse_feeder_json(const std::string& text);
FeederTopology load_feeder_json(const std::string& path);

/// Scenario CSV with header scenario_id,bus_id,p_g,p_l,q_l. Buses a
/// scenario does not mention carry zero injections; unknown bus ids are
/// rejected. Scenarios are ordered by ascending id.
ScenarioSet parse_scenarios_csv(const std::string& text, const FeederModel& model);
ScenarioSet load_scenarios_csv(const std::string& path, const FeederModel& model);
std::string scenarios_to_csv(const FeederModel& model, const ScenarioSet& scenarios);

/// Rule-set JSON: symmetric rules as [{bus, v_bar, delta, sigma, c, q_bar,
/// q_hat}] (q_bar informational, ignored on load); non-symmetric rules carry
/// the per-branch fields instead. Entries are matched to the model's
/// inverter buses by id.
RuleSet parse_rules_json(const std::string& text, const FeederModel& model);
RuleSet load_rules_json(const std::string& path, const FeederModel& model);
std::string rules_to_json(const FeederModel& model, const RuleSet& rules);

std::string stability_to_json(const StabilityReport& report);
std::string equilibria_to_json(const FeederModel& model, const std::vector<Equilibrium>& eqs);
std::string design_report_to_json(const FeederModel& model, const DesignReport& report);

/// compare table: scheme, vdm, max_abs_dev, band_violations.
std::string benchmark_table_csv(const std::vector<BenchmarkResult>& results);
/// One scheme's summary as JSON (used by out-of-sample evaluation).
std::string benchmark_to_json(const BenchmarkResult& result);
/// Per-scheme voltage dump: scheme, scenario, bus, v.
std::string benchmark_voltages_csv(const FeederModel& model, const ScenarioSet& scenarios,
                                   const std::vector<BenchmarkResult>& results);
/// simulate output: step, bus, v, q (q empty for non-inverter buses).
std::string trajectory_csv(const FeederModel& model, const Trajectory& trajectory);
std::string cost_trajectory_csv(const std::vector<double>& costs);
/// validate-linearization output: bus, scenario, v_lin, v_ac, error.
std::string linearization_csv(const FeederModel& model, const std::vector<long>& scenario_ids,
                              const std::vector<Vec>& v_lin, const std::vector<Vec>& v_ac);

struct AveragedCsv {
    std::string csv;
    int windows = 0;
    bool partial_tail = false;   // last window averaged fewer rows
};

/// Average a high-resolution scenario CSV over consecutive blocks of
/// `window` time steps (per bus), emitting one scenario per block.
AveragedCsv average_scenarios_csv(const std::string& text, int window);

} // namespace vvo::io
