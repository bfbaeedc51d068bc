#include "io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "errors.hpp"

namespace vvo::io {

using nlohmann::json;

namespace {

/// Shortest round-trip decimal form; keeps emitted files byte-stable.
std::string num(double x) { return json(x).dump(); }

json parse_json(const std::string& text, const char* what) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded())
        fail(ErrorCode::ParseError, std::string(what) + ": malformed JSON");
    return doc;
}

double require_number(const json& obj, const char* key, const char* what) {
    if (!obj.contains(key) || !obj[key].is_number())
        fail(ErrorCode::ParseError, std::string(what) + ": missing numeric field '" + key + "'");
    return obj[key].get<double>();
}

long require_integer(const json& obj, const char* key, const char* what) {
    if (!obj.contains(key) || !obj[key].is_number_integer())
        fail(ErrorCode::ParseError, std::string(what) + ": missing integer field '" + key + "'");
    return obj[key].get<long>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto a = field.find_first_not_of(" \t\r");
        const auto b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string() : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, int line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError,
             "line " + std::to_string(line_no) + ": expected a number, got '" + s + "'");
    }
}

long parse_long(const std::string& s, int line_no) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError,
             "line " + std::to_string(line_no) + ": expected an integer, got '" + s + "'");
    }
}

struct CsvRow {
    long scenario = 0;
    long bus = 0;
    double p_g = 0, p_l = 0, q_l = 0;
};

std::vector<CsvRow> parse_scenario_rows(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            const std::vector<std::string> expect = {"scenario_id", "bus_id", "p_g", "p_l", "q_l"};
            std::vector<std::string> got = fields;
            for (auto& f : got)
                std::transform(f.begin(), f.end(), f.begin(),
                               [](unsigned char c) { return std::tolower(c); });
            if (got != expect)
                fail(ErrorCode::ParseError,
                     "scenario CSV: expected header scenario_id,bus_id,p_g,p_l,q_l");
            header_seen = true;
            continue;
        }
        if (fields.size() != 5)
            fail(ErrorCode::ParseError,
                 "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                     std::to_string(fields.size()));
        CsvRow row;
        row.scenario = parse_long(fields[0], line_no);
        row.bus = parse_long(fields[1], line_no);
        row.p_g = parse_double(fields[2], line_no);
        row.p_l = parse_double(fields[3], line_no);
        row.q_l = parse_double(fields[4], line_no);
        rows.push_back(row);
    }
    if (!header_seen) fail(ErrorCode::ParseError, "scenario CSV: empty file");
    return rows;
}

} // namespace

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

FeederTopology parse_feeder_json(const std::string& text) {
    const json doc = parse_json(text, "feeder");
    if (!doc.is_object()) fail(ErrorCode::ParseError, "feeder: top level must be an object");
    FeederTopology topo;
    topo.v0 = doc.contains("v0") ? require_number(doc, "v0", "feeder") : 1.0;

    if (!doc.contains("buses") || !doc["buses"].is_array() || doc["buses"].empty())
        fail(ErrorCode::ParseError, "feeder: 'buses' must be a non-empty array");
    const auto& buses = doc["buses"];
    const int n = static_cast<int>(buses.size());
    topo.bus_count = n;

    std::unordered_map<long, int> bus_of_id; // external id -> internal bus (1-based)
    std::vector<long> ids(static_cast<size_t>(n));
    std::vector<long> parent_ids(static_cast<size_t>(n));
    topo.line_r.resize(static_cast<size_t>(n));
    topo.line_x.resize(static_cast<size_t>(n));
    topo.external_ids.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto& b = buses[k];
        if (!b.is_object()) fail(ErrorCode::ParseError, "feeder: bus entries must be objects");
        const long id = require_integer(b, "id", "feeder bus");
        if (id <= 0)
            fail(ErrorCode::ParseError, "feeder: bus ids must be positive (0 is the substation)");
        if (id > std::numeric_limits<int>::max())
            fail(ErrorCode::ParseError, "feeder: bus id " + std::to_string(id) + " out of range");
        if (!bus_of_id.emplace(id, k + 1).second)
            fail(ErrorCode::ParseError, "feeder: duplicate bus id " + std::to_string(id));
        ids[static_cast<size_t>(k)] = id;
        parent_ids[static_cast<size_t>(k)] = require_integer(b, "parent", "feeder bus");
        topo.line_r[static_cast<size_t>(k)] = require_number(b, "r", "feeder bus");
        topo.line_x[static_cast<size_t>(k)] = require_number(b, "x", "feeder bus");
        topo.external_ids[static_cast<size_t>(k)] = static_cast<int>(id);
    }
    topo.parent.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const long pid = parent_ids[static_cast<size_t>(k)];
        if (pid == 0) {
            topo.parent[static_cast<size_t>(k)] = 0;
        } else {
            const auto it = bus_of_id.find(pid);
            if (it == bus_of_id.end())
                fail(ErrorCode::ParseError,
                     "feeder: bus " + std::to_string(ids[static_cast<size_t>(k)]) +
                         " references unknown parent " + std::to_string(pid));
            topo.parent[static_cast<size_t>(k)] = it->second;
        }
    }

    if (!doc.contains("inverters") || !doc["inverters"].is_array())
        fail(ErrorCode::ParseError, "feeder: 'inverters' must be an array of bus ids");
    std::unordered_set<long> seen;
    for (const auto& entry : doc["inverters"]) {
        if (!entry.is_number_integer())
            fail(ErrorCode::ParseError, "feeder: inverter entries must be bus ids");
        const long id = entry.get<long>();
        const auto it = bus_of_id.find(id);
        if (it == bus_of_id.end())
            fail(ErrorCode::ParseError, "feeder: inverter at unknown bus " + std::to_string(id));
        if (!seen.insert(id).second)
            fail(ErrorCode::ParseError, "feeder: duplicate inverter bus " + std::to_string(id));
        topo.inverter_buses.push_back(it->second);
    }
    if (topo.inverter_buses.empty())
        fail(ErrorCode::ParseError, "feeder: at least one inverter bus is required");

    const auto load_aligned = [&](const char* key, std::vector<double>& dst) {
        if (!doc.contains(key) || !doc[key].is_array() ||
            doc[key].size() != topo.inverter_buses.size())
            fail(ErrorCode::ParseError, std::string("feeder: '") + key +
                                            "' must be an array aligned with 'inverters'");
        for (const auto& entry : doc[key]) {
            if (!entry.is_number())
                fail(ErrorCode::ParseError,
                     std::string("feeder: '") + key + "' entries must be numbers");
            dst.push_back(entry.get<double>());
        }
    };
    load_aligned("q_hat", topo.q_hat);
    load_aligned("p_bar", topo.p_bar);
    return topo;
}

FeederTopology load_feeder_json(const std::string& path) {
    return parse_feeder_json(read_text(path));
}

ScenarioSet parse_scenarios_csv(const std::string& text, const FeederModel& model) {
    const auto rows = parse_scenario_rows(text);
    const int n = model.bus_count();

    // Group by scenario id, ascending; unmentioned buses carry zeros.
    std::map<long, std::vector<const CsvRow*>> grouped;
    for (const auto& row : rows) grouped[row.scenario].push_back(&row);

    ScenarioSet set;
    for (const auto& [sid, bucket] : grouped) {
        Vec p_g = Vec::Zero(n), p_l = Vec::Zero(n), q_l = Vec::Zero(n);
        std::unordered_set<long> mentioned;
        for (const CsvRow* row : bucket) {
            if (row->bus > std::numeric_limits<int>::max() || row->bus < 0)
                fail(ErrorCode::ParseError, "unknown bus id " + std::to_string(row->bus));
            const int k = model.internal_bus(static_cast<int>(row->bus)); // throws on unknown id
            if (!mentioned.insert(row->bus).second)
                fail(ErrorCode::ParseError, "scenario " + std::to_string(sid) +
                                                ": duplicate row for bus " +
                                                std::to_string(row->bus));
            p_g[k] = row->p_g;
            p_l[k] = row->p_l;
            q_l[k] = row->q_l;
        }
        set.scenarios.push_back(grid_conditions(model, p_g, p_l, q_l, sid));
    }
    return set;
}

ScenarioSet load_scenarios_csv(const std::string& path, const FeederModel& model) {
    return parse_scenarios_csv(read_text(path), model);
}

std::string scenarios_to_csv(const FeederModel& model, const ScenarioSet& scenarios) {
    std::ostringstream out;
    out << "scenario_id,bus_id,p_g,p_l,q_l\n";
    for (const auto& sc : scenarios.scenarios)
        for (int k = 0; k < model.bus_count(); ++k)
            out << sc.id << ',' << model.external_id(k) << ',' << num(sc.p_g[k]) << ','
                << num(sc.p_l[k]) << ',' << num(sc.q_l[k]) << '\n';
    return out.str();
}

RuleSet parse_rules_json(const std::string& text, const FeederModel& model) {
    const json doc = parse_json(text, "rules");
    if (!doc.is_array()) fail(ErrorCode::ParseError, "rules: top level must be an array");
    const auto& inv = model.inverters();
    const int g = static_cast<int>(inv.size());
    if (static_cast<int>(doc.size()) != g)
        fail(ErrorCode::ParseError, "rules: expected " + std::to_string(g) + " entries, got " +
                                        std::to_string(doc.size()));

    const bool two_sided = doc[0].is_object() && doc[0].contains("delta_p");
    std::vector<RuleParams> sym_rules(two_sided ? 0 : static_cast<size_t>(g));
    std::vector<NonSymRuleParams> nonsym_rules(two_sided ? static_cast<size_t>(g) : 0);
    std::vector<bool> filled(static_cast<size_t>(g), false);
    for (const auto& entry : doc) {
        if (!entry.is_object()) fail(ErrorCode::ParseError, "rules: entries must be objects");
        const long bus = require_integer(entry, "bus", "rule");
        if (bus > std::numeric_limits<int>::max() || bus < 0)
            fail(ErrorCode::ParseError, "unknown bus id " + std::to_string(bus));
        const int internal = model.internal_bus(static_cast<int>(bus));
        const auto it = std::find(inv.begin(), inv.end(), internal);
        if (it == inv.end())
            fail(ErrorCode::ParseError, "rules: bus " + std::to_string(bus) + " has no inverter");
        const auto slot = static_cast<size_t>(it - inv.begin());
        if (filled[slot])
            fail(ErrorCode::ParseError, "rules: duplicate entry for bus " + std::to_string(bus));
        filled[slot] = true;

        const double q_hat = require_number(entry, "q_hat", "rule");
        if (two_sided) {
            NonSymRuleParams p;
            p.v_bar = require_number(entry, "v_bar", "rule");
            p.delta_p = require_number(entry, "delta_p", "rule");
            p.c_p = require_number(entry, "c_p", "rule");
            p.delta_m = require_number(entry, "delta_m", "rule");
            p.c_m = require_number(entry, "c_m", "rule");
            // Saturation widths define the branch limits; emitted q_bar_p/m
            // are informational and re-derived here.
            const double sigma_p = require_number(entry, "sigma_p", "rule");
            const double sigma_m = require_number(entry, "sigma_m", "rule");
            p.q_bar_p = (sigma_p - p.delta_p) / p.c_p;
            p.q_bar_m = (sigma_m - p.delta_m) / p.c_m;
            p.q_hat = q_hat;
            nonsym_rules[slot] = p;
        } else {
            RuleParams p;
            p.v_bar = require_number(entry, "v_bar", "rule");
            p.delta = require_number(entry, "delta", "rule");
            p.sigma = require_number(entry, "sigma", "rule");
            p.c = require_number(entry, "c", "rule");
            p.q_hat = q_hat; // q_bar is informational; re-derived as (sigma-delta)/c
            sym_rules[slot] = p;
        }
    }
    return two_sided ? RuleSet(nonsym_rules) : RuleSet(sym_rules);
}

RuleSet load_rules_json(const std::string& path, const FeederModel& model) {
    return parse_rules_json(read_text(path), model);
}

std::string rules_to_json(const FeederModel& model, const RuleSet& rules) {
    const auto& inv = model.inverters();
    if (rules.size() != static_cast<int>(inv.size()))
        fail(ErrorCode::DimensionMismatch, "rule set does not match the feeder's inverter set");
    json arr = json::array();
    if (rules.symmetric()) {
        const auto& entries = rules.sym();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& p = entries[i];
            json obj;
            obj["bus"] = model.external_id(inv[i]);
            obj["v_bar"] = p.v_bar;
            obj["delta"] = p.delta;
            obj["sigma"] = p.sigma;
            obj["c"] = p.c;
            obj["q_bar"] = p.q_bar();
            obj["q_hat"] = p.q_hat;
            arr.push_back(std::move(obj));
        }
    } else {
        const auto& entries = rules.nonsym();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& p = entries[i];
            json obj;
            obj["bus"] = model.external_id(inv[i]);
            obj["v_bar"] = p.v_bar;
            obj["delta_p"] = p.delta_p;
            obj["sigma_p"] = p.sigma_p();
            obj["c_p"] = p.c_p;
            obj["q_bar_p"] = p.q_bar_p;
            obj["delta_m"] = p.delta_m;
            obj["sigma_m"] = p.sigma_m();
            obj["c_m"] = p.c_m;
            obj["q_bar_m"] = p.q_bar_m;
            obj["q_hat"] = p.q_hat;
            arr.push_back(std::move(obj));
        }
    }
    return arr.dump(2) + "\n";
}

namespace {

json stability_json(const StabilityReport& r) {
    json obj;
    obj["spectral_norm"] = r.spectral_norm;
    obj["eps"] = r.eps;
    obj["spectral_ok"] = r.spectral_ok;
    obj["polytope_ok"] = r.polytope_ok;
    obj["violated_family1"] = r.violated_family1;
    obj["violated_family2"] = r.violated_family2;
    return obj;
}

} // namespace

std::string stability_to_json(const StabilityReport& report) {
    return stability_json(report).dump(2) + "\n";
}

std::string equilibria_to_json(const FeederModel& model, const std::vector<Equilibrium>& eqs) {
    json arr = json::array();
    const auto& inv = model.inverters();
    for (const auto& eq : eqs) {
        json obj;
        obj["method"] = eq.method;
        obj["iterations"] = eq.iterations;
        obj["residual"] = eq.residual;
        obj["converged"] = eq.converged;
        json qj = json::array(), vj = json::array(), bj = json::array();
        for (int i = 0; i < eq.q_eq.size(); ++i) {
            bj.push_back(model.external_id(inv[static_cast<size_t>(i)]));
            qj.push_back(eq.q_eq[i]);
        }
        for (int k = 0; k < eq.v_eq.size(); ++k) vj.push_back(eq.v_eq[k]);
        obj["bus"] = std::move(bj);
        obj["q"] = std::move(qj);
        obj["v"] = std::move(vj);
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

std::string design_report_to_json(const FeederModel& model, const DesignReport& report) {
    const int g = model.inverter_count();
    const bool two_sided = report.z.size() == 7L * g;
    const RuleSet rules =
        two_sided ? from_z_nonsym(report.z, model.q_hat()) : from_z(report.z, model.q_hat());

    json obj;
    obj["final_cost"] = report.final_cost;
    obj["iterations"] = report.iterations;
    obj["converged"] = report.converged;
    obj["stationarity"] = report.stationarity;
    obj["cost_trajectory"] = report.cost_trajectory;
    obj["stability"] = stability_json(report.stability);
    json timing;
    timing["total_sec"] = report.wall_total_sec;
    timing["projection_sec"] = report.wall_projection_sec;
    timing["equilibrium_sec"] = report.wall_equilibrium_sec;
    obj["timing"] = std::move(timing);
    obj["rules"] = json::parse(rules_to_json(model, rules));
    return obj.dump(2) + "\n";
}

std::string benchmark_table_csv(const std::vector<BenchmarkResult>& results) {
    std::ostringstream out;
    out << "scheme,vdm,max_abs_dev,band_violations\n";
    for (const auto& r : results)
        out << r.scheme << ',' << num(r.vdm) << ',' << num(r.max_deviation) << ','
            << r.band_violations << '\n';
    return out.str();
}

std::string benchmark_to_json(const BenchmarkResult& result) {
    json obj;
    obj["scheme"] = result.scheme;
    obj["vdm"] = result.vdm;
    obj["max_abs_dev"] = result.max_deviation;
    obj["band_violations"] = result.band_violations;
    if (result.stability) obj["stability"] = stability_json(*result.stability);
    return obj.dump(2) + "\n";
}

std::string benchmark_voltages_csv(const FeederModel& model, const ScenarioSet& scenarios,
                                   const std::vector<BenchmarkResult>& results) {
    std::ostringstream out;
    out << "scheme,scenario_id,bus_id,v\n";
    for (const auto& r : results) {
        if (r.voltages.size() != scenarios.scenarios.size())
            fail(ErrorCode::DimensionMismatch, "benchmark voltages do not match scenario set");
        for (std::size_t s = 0; s < r.voltages.size(); ++s)
            for (int k = 0; k < model.bus_count(); ++k)
                out << r.scheme << ',' << scenarios.scenarios[s].id << ',' << model.external_id(k)
                    << ',' << num(r.voltages[s][k]) << '\n';
    }
    return out.str();
}

std::string trajectory_csv(const FeederModel& model, const Trajectory& trajectory) {
    std::ostringstream out;
    out << "step,bus_id,v,q\n";
    const auto& inv = model.inverters();
    for (std::size_t t = 0; t < trajectory.v.size(); ++t) {
        for (int k = 0; k < model.bus_count(); ++k) {
            out << t << ',' << model.external_id(k) << ',' << num(trajectory.v[t][k]) << ',';
            const auto it = std::find(inv.begin(), inv.end(), k);
            if (it != inv.end() && t < trajectory.q.size())
                out << num(trajectory.q[t][it - inv.begin()]);
            out << '\n';
        }
    }
    return out.str();
}

std::string cost_trajectory_csv(const std::vector<double>& costs) {
    std::ostringstream out;
    out << "iteration,cost\n";
    for (std::size_t i = 0; i < costs.size(); ++i) out << i << ',' << num(costs[i]) << '\n';
    return out.str();
}

std::string linearization_csv(const FeederModel& model, const std::vector<long>& scenario_ids,
                              const std::vector<Vec>& v_lin, const std::vector<Vec>& v_ac) {
    if (v_lin.size() != v_ac.size() || v_lin.size() != scenario_ids.size())
        fail(ErrorCode::DimensionMismatch, "linearization_csv: mismatched batch sizes");
    std::ostringstream out;
    out << "bus_id,scenario_id,v_lin,v_ac,error\n";
    for (std::size_t s = 0; s < v_lin.size(); ++s) {
        if (v_lin[s].size() != model.bus_count() || v_ac[s].size() != model.bus_count())
            fail(ErrorCode::DimensionMismatch, "linearization_csv: bad voltage length");
        for (int k = 0; k < model.bus_count(); ++k)
            out << model.external_id(k) << ',' << scenario_ids[s] << ',' << num(v_lin[s][k]) << ','
                << num(v_ac[s][k]) << ',' << num(v_lin[s][k] - v_ac[s][k]) << '\n';
    }
    return out.str();
}

AveragedCsv average_scenarios_csv(const std::string& text, int window) {
    if (window <= 0) fail(ErrorCode::InvalidArgument, "window must be positive");
    const auto rows = parse_scenario_rows(text);

    // Time steps ordered ascending; every step must mention the same buses.
    std::map<long, std::map<long, const CsvRow*>> by_step;
    for (const auto& row : rows) {
        if (!by_step[row.scenario].emplace(row.bus, &row).second)
            fail(ErrorCode::ParseError, "time step " + std::to_string(row.scenario) +
                                            ": duplicate row for bus " + std::to_string(row.bus));
    }
    std::vector<long> buses;
    for (const auto& [bus, row] : by_step.begin()->second) buses.push_back(bus);
    for (const auto& [step, per_bus] : by_step) {
        if (per_bus.size() != buses.size())
            fail(ErrorCode::ParseError,
                 "time step " + std::to_string(step) + ": inconsistent bus coverage");
        for (long bus : buses)
            if (!per_bus.count(bus))
                fail(ErrorCode::ParseError, "time step " + std::to_string(step) +
                                                ": missing bus " + std::to_string(bus));
    }

    std::vector<long> steps;
    steps.reserve(by_step.size());
    for (const auto& [step, per_bus] : by_step) steps.push_back(step);

    std::ostringstream out;
    out << "scenario_id,bus_id,p_g,p_l,q_l\n";
    AveragedCsv result;
    for (std::size_t start = 0; start < steps.size();
         start += static_cast<std::size_t>(window)) {
        const std::size_t stop = std::min(steps.size(), start + static_cast<std::size_t>(window));
        const long sid = static_cast<long>(result.windows);
        for (long bus : buses) {
            double p_g = 0, p_l = 0, q_l = 0;
            for (std::size_t t = start; t < stop; ++t) {
                const CsvRow* row = by_step[steps[t]].at(bus);
                p_g += row->p_g;
                p_l += row->p_l;
                q_l += row->q_l;
            }
            const double count = static_cast<double>(stop - start);
            out << sid << ',' << bus << ',' << num(p_g / count) << ',' << num(p_l / count) << ','
                << num(q_l / count) << '\n';
        }
        if (stop - start < static_cast<std::size_t>(window)) result.partial_tail = true;
        ++result.windows;
    }
    result.csv = out.str();
    return result;
}

} // namespace vvo::io
