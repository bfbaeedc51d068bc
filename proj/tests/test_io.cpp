#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "designer.hpp"
#include "helpers.hpp"
#include "io.hpp"

using namespace vvo;
using nlohmann::json;

#ifndef VVO_SCHEMA_DIR
#define VVO_SCHEMA_DIR "schemas"
#endif

namespace {

const char* kFeederJson = R"({
  "v0": 1.0,
  "buses": [
    {"id": 10, "parent": 0, "r": 0.05, "x": 0.9},
    {"id": 20, "parent": 10, "r": 0.06, "x": 1.1},
    {"id": 30, "parent": 20, "r": 0.04, "x": 0.7}
  ],
  "inverters": [10, 30],
  "q_hat": [0.4, 0.3],
  "p_bar": [1.0, 0.8]
})";

FeederModel sample_model() { return FeederModel::build(io::parse_feeder_json(kFeederJson)); }

/// Minimal JSON-schema checker covering the subset the shipped schemas use:
/// type, required, properties, additionalProperties, items, minItems, enum,
/// minimum, exclusiveMinimum, oneOf and file-relative $ref.
class SchemaChecker {
public:
    explicit SchemaChecker(std::filesystem::path dir) : dir_(std::move(dir)) {}

    json load(const std::string& name) const {
        std::ifstream in(dir_ / name);
        REQUIRE(in.good());
        return json::parse(in);
    }

    bool valid(const json& inst, const json& schema, std::string* why = nullptr) const {
        std::string local;
        const bool ok = check(inst, schema, "$", local);
        if (!ok && why) *why = local;
        return ok;
    }

private:
    bool fail_at(const std::string& path, const std::string& msg, std::string& why) const {
        why = path + ": " + msg;
        return false;
    }

    bool check(const json& inst, const json& schema, const std::string& path,
               std::string& why) const {
        if (schema.contains("$ref"))
            return check(inst, load(schema["$ref"].get<std::string>()), path, why);
        if (schema.contains("oneOf")) {
            int hits = 0;
            for (const json& sub : schema["oneOf"]) {
                std::string ignored;
                if (check(inst, sub, path, ignored)) ++hits;
            }
            if (hits != 1) return fail_at(path, "oneOf matched " + std::to_string(hits), why);
        }
        if (schema.contains("type")) {
            const std::string t = schema["type"].get<std::string>();
            const bool ok = (t == "object" && inst.is_object()) ||
                            (t == "array" && inst.is_array()) ||
                            (t == "string" && inst.is_string()) ||
                            (t == "boolean" && inst.is_boolean()) ||
                            (t == "integer" && inst.is_number_integer()) ||
                            (t == "number" && inst.is_number());
            if (!ok) return fail_at(path, "expected type " + t, why);
        }
        if (schema.contains("enum")) {
            bool hit = false;
            for (const json& v : schema["enum"]) hit = hit || v == inst;
            if (!hit) return fail_at(path, "not in enum", why);
        }
        if (inst.is_number()) {
            const double x = inst.get<double>();
            if (schema.contains("minimum") && x < schema["minimum"].get<double>())
                return fail_at(path, "below minimum", why);
            if (schema.contains("exclusiveMinimum") &&
                x <= schema["exclusiveMinimum"].get<double>())
                return fail_at(path, "not above exclusiveMinimum", why);
        }
        if (inst.is_object()) {
            if (schema.contains("required"))
                for (const json& key : schema["required"])
                    if (!inst.contains(key.get<std::string>()))
                        return fail_at(path, "missing " + key.get<std::string>(), why);
            const json props =
                schema.contains("properties") ? schema["properties"] : json::object();
            for (const auto& [key, value] : inst.items()) {
                if (props.contains(key)) {
                    if (!check(value, props[key], path + "." + key, why)) return false;
                } else if (schema.contains("additionalProperties") &&
                           schema["additionalProperties"].is_boolean() &&
                           !schema["additionalProperties"].get<bool>()) {
                    return fail_at(path, "unexpected key " + key, why);
                }
            }
        }
        if (inst.is_array()) {
            if (schema.contains("minItems") && inst.size() < schema["minItems"].get<size_t>())
                return fail_at(path, "too few items", why);
            if (schema.contains("items")) {
                size_t i = 0;
                for (const json& el : inst)
                    if (!check(el, schema["items"], path + "[" + std::to_string(i++) + "]", why))
                        return false;
            }
        }
        return true;
    }

    std::filesystem::path dir_;
};

void expect_schema(const SchemaChecker& checker, const std::string& schema_name,
                   const std::string& doc) {
    std::string why;
    const bool ok = checker.valid(json::parse(doc), checker.load(schema_name), &why);
    INFO(schema_name << " rejected document: " << why);
    REQUIRE(ok);
}

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    io::write_text(path.string(), text);
    return path;
}

} // namespace

TEST_CASE("feeder JSON is parsed with id remapping", "[io]") {
    const FeederModel model = sample_model();
    REQUIRE(model.bus_count() == 3);
    REQUIRE(model.inverter_count() == 2);
    REQUIRE(model.v0() == 1.0);
    REQUIRE(model.external_id(0) == 10);
    REQUIRE(model.internal_bus(30) == 2);
    // Chain 10 -> 20 -> 30: X(2,2) sums the whole path.
    REQUIRE(model.X()(2, 2) == Catch::Approx(0.9 + 1.1 + 0.7));
    REQUIRE(model.X()(0, 2) == Catch::Approx(0.9));
    // Inverters at external 10 and 30 map to internal 0 and 2.
    REQUIRE(model.inverters() == std::vector<int>{0, 2});

    SchemaChecker checker{VVO_SCHEMA_DIR};
    expect_schema(checker, "feeder.schema.json", kFeederJson);
}

TEST_CASE("feeder JSON problems raise ParseError", "[io]") {
    auto mutate = [](const std::string& from, const std::string& to) {
        std::string text = kFeederJson;
        const auto at = text.find(from);
        REQUIRE(at != std::string::npos);
        return text.replace(at, from.size(), to);
    };
    // Duplicate bus id.
    REQUIRE_THROWS_AS(io::parse_feeder_json(mutate("\"id\": 20", "\"id\": 10")), Error);
    // Parent pointing nowhere.
    REQUIRE_THROWS_AS(io::parse_feeder_json(mutate("\"parent\": 20", "\"parent\": 99")), Error);
    // Inverter at an unknown bus.
    REQUIRE_THROWS_AS(io::parse_feeder_json(mutate("[10, 30]", "[10, 31]")), Error);
    // Ratings misaligned with the inverter list.
    REQUIRE_THROWS_AS(io::parse_feeder_json(mutate("[0.4, 0.3]", "[0.4]")), Error);
    // Bus ids must be positive (0 denotes the substation).
    REQUIRE_THROWS_AS(io::parse_feeder_json(mutate("\"id\": 10", "\"id\": 0")), Error);
    // Not JSON at all.
    REQUIRE_THROWS_MATCHES(io::parse_feeder_json("{nope"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.code() == ErrorCode::ParseError;
                           }));
}

TEST_CASE("scenario CSV parses, defaults, and rejects junk", "[io]") {
    const FeederModel model = sample_model();
    const std::string csv =
        "scenario_id,bus_id,p_g,p_l,q_l\n"
        "2,10,0.1,0.2,0.05\n"
        "1,30,0.3,0.0,0.01\n"
        "2,30,0.0,0.4,0.02\n";
    const ScenarioSet set = io::parse_scenarios_csv(csv, model);
    REQUIRE(set.count() == 2);
    // Ascending id order regardless of row order.
    REQUIRE(set[0].id == 1);
    REQUIRE(set[1].id == 2);
    // Unmentioned buses carry zeros.
    REQUIRE(set[0].p_g(2) == 0.3);
    REQUIRE(set[0].p_g(0) == 0.0);
    REQUIRE(set[0].p_l(1) == 0.0);
    REQUIRE(set[1].p_l(2) == 0.4);
    // Grid conditions are derived on load.
    const Vec expect = grid_conditions(model, set[1].p_g, set[1].p_l, set[1].q_l).v_tilde;
    REQUIRE((set[1].v_tilde - expect).cwiseAbs().maxCoeff() == 0.0);

    REQUIRE_THROWS_AS(io::parse_scenarios_csv("bus,p\n1,2\n", model), Error);
    REQUIRE_THROWS_AS(
        io::parse_scenarios_csv("scenario_id,bus_id,p_g,p_l,q_l\n1,99,0,0,0\n", model),
        Error);
    REQUIRE_THROWS_AS(
        io::parse_scenarios_csv(
            "scenario_id,bus_id,p_g,p_l,q_l\n1,10,0,0,0\n1,10,1,1,1\n", model),
        Error);
    REQUIRE_THROWS_AS(
        io::parse_scenarios_csv("scenario_id,bus_id,p_g,p_l,q_l\n1,10,zero,0,0\n", model),
        Error);
}

TEST_CASE("scenario CSV round-trips byte-identically", "[io]") {
    std::mt19937 rng(161);
    const FeederModel model = sample_model();
    const ScenarioSet set = vvt::random_scenarios(rng, model, 4, 0.1);
    const std::string csv = io::scenarios_to_csv(model, set);
    const ScenarioSet back = io::parse_scenarios_csv(csv, model);
    REQUIRE(back.count() == set.count());
    for (int s = 0; s < set.count(); ++s) {
        REQUIRE((back[s].p_g - set[s].p_g).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back[s].p_l - set[s].p_l).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back[s].q_l - set[s].q_l).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((back[s].v_tilde - set[s].v_tilde).cwiseAbs().maxCoeff() == 0.0);
    }
    REQUIRE(io::scenarios_to_csv(model, back) == csv);
}

TEST_CASE("rule JSON round-trips and ignores the informational q_bar", "[io]") {
    const FeederModel model = sample_model();
    std::mt19937 rng(163);
    const RuleSet rules = vvt::random_stable_rules(rng, model, 0.05);
    const std::string doc = io::rules_to_json(model, rules);

    SchemaChecker checker{VVO_SCHEMA_DIR};
    expect_schema(checker, "rules.schema.json", doc);

    const RuleSet back = io::parse_rules_json(doc, model);
    REQUIRE(back.symmetric());
    for (int i = 0; i < rules.size(); ++i) {
        const auto& a = rules.sym()[static_cast<size_t>(i)];
        const auto& b = back.sym()[static_cast<size_t>(i)];
        REQUIRE(b.v_bar == a.v_bar);
        REQUIRE(b.delta == a.delta);
        REQUIRE(b.sigma == a.sigma);
        REQUIRE(b.c == a.c);
        REQUIRE(b.q_hat == a.q_hat);
    }

    // Tampering with q_bar in the file changes nothing: it is re-derived.
    json tampered = json::parse(doc);
    tampered[0]["q_bar"] = 99.0;
    const RuleSet again = io::parse_rules_json(tampered.dump(), model);
    REQUIRE(again.sym()[0].q_bar() == Catch::Approx(rules.sym()[0].q_bar()));

    // Entries are matched by bus id, order-free.
    json swapped = json::parse(doc);
    std::swap(swapped[0], swapped[1]);
    const RuleSet reordered = io::parse_rules_json(swapped.dump(), model);
    REQUIRE(reordered.sym()[0].c == rules.sym()[0].c);

    // Wrong bus count and duplicate ids are rejected.
    json dropped = json::parse(doc);
    dropped.erase(1);
    REQUIRE_THROWS_AS(io::parse_rules_json(dropped.dump(), model), Error);
    json dup = json::parse(doc);
    dup[1]["bus"] = dup[0]["bus"];
    REQUIRE_THROWS_AS(io::parse_rules_json(dup.dump(), model), Error);
}

TEST_CASE("two-branch rule JSON round-trips through the branch fields", "[io]") {
    const FeederModel model = sample_model();
    NonSymRuleParams r;
    r.v_bar = 1.01;
    r.q_hat = 0.4;
    r.delta_p = 0.012;
    r.c_p = 3.0;
    r.q_bar_p = 0.02;
    r.delta_m = 0.02;
    r.c_m = 4.0;
    r.q_bar_m = 0.015;
    NonSymRuleParams r2 = r;
    r2.q_hat = 0.3;
    r2.c_m = 5.0;
    const RuleSet rules(std::vector<NonSymRuleParams>{r, r2});

    const std::string doc = io::rules_to_json(model, rules);
    SchemaChecker checker{VVO_SCHEMA_DIR};
    expect_schema(checker, "rules.schema.json", doc);

    const RuleSet back = io::parse_rules_json(doc, model);
    REQUIRE_FALSE(back.symmetric());
    const auto& b = back.nonsym()[1];
    REQUIRE(b.v_bar == r2.v_bar);
    REQUIRE(b.delta_p == r2.delta_p);
    REQUIRE(b.c_p == r2.c_p);
    REQUIRE(b.q_bar_p == Catch::Approx(r2.q_bar_p));
    REQUIRE(b.delta_m == r2.delta_m);
    REQUIRE(b.c_m == r2.c_m);
    REQUIRE(b.q_bar_m == Catch::Approx(r2.q_bar_m));
    REQUIRE(b.q_hat == r2.q_hat);
}

TEST_CASE("reports serialize to schema-valid JSON", "[io]") {
    const FeederModel model = sample_model();
    std::mt19937 rng(167);
    const ScenarioSet scenarios = vvt::random_scenarios(rng, model, 3, 0.1);
    SchemaChecker checker{VVO_SCHEMA_DIR};

    const RuleSet rules = vvt::random_stable_rules(rng, model, 0.05);
    const StabilityReport stab = full_check(model.X_gg(), rules.alphas(), 0.05);
    expect_schema(checker, "stability.schema.json", io::stability_to_json(stab));
    const json stab_doc = json::parse(io::stability_to_json(stab));
    REQUIRE(stab_doc["spectral_norm"].get<double>() == Catch::Approx(stab.spectral_norm));
    REQUIRE(stab_doc["polytope_ok"].get<bool>() == stab.polytope_ok);

    const std::vector<Equilibrium> eqs = batch_equilibria(model, rules, scenarios);
    const std::string eq_doc = io::equilibria_to_json(model, eqs);
    expect_schema(checker, "equilibria.schema.json", eq_doc);
    const json parsed = json::parse(eq_doc);
    REQUIRE(parsed.size() == 3);
    REQUIRE(parsed[0]["q"].size() == 2);  // one entry per inverter
    REQUIRE(parsed[0]["v"].size() == 3);  // full voltage profile
    // Bus ids in reports are external.
    REQUIRE(parsed[0]["bus"][0].get<long>() == 10);
    REQUIRE(parsed[0]["bus"][1].get<long>() == 30);

    DesignConfig cfg;
    cfg.eps = 0.05;
    cfg.max_iters = 40;
    const DesignReport report = design(model, scenarios, cfg);
    const std::string rep_doc = io::design_report_to_json(model, report);
    expect_schema(checker, "design_report.schema.json", rep_doc);
    const json rep = json::parse(rep_doc);
    REQUIRE(rep["final_cost"].get<double>() == Catch::Approx(report.final_cost));
    REQUIRE(rep["rules"].size() == 2);
    REQUIRE(rep["stability"]["polytope_ok"].get<bool>());
    REQUIRE(rep["cost_trajectory"].size() == report.cost_trajectory.size());

    const BenchmarkResult bench = evaluate_rules(model, rules, scenarios, "designed", 0.05);
    expect_schema(checker, "evaluation.schema.json", io::benchmark_to_json(bench));
}

TEST_CASE("benchmark tables carry one row per scheme", "[io]") {
    const FeederModel model = sample_model();
    std::mt19937 rng(171);
    const ScenarioSet scenarios = vvt::random_scenarios(rng, model, 2, 0.1);
    std::vector<BenchmarkResult> rows;
    rows.push_back(unit_pf(model, scenarios));
    rows.push_back(per_scenario_optimal(model, scenarios));
    const std::string csv = io::benchmark_table_csv(rows);

    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "scheme,vdm,max_abs_dev,band_violations");
    std::getline(in, line);
    REQUIRE(line.rfind("a1,", 0) == 0);
    std::getline(in, line);
    REQUIRE(line.rfind("a2,", 0) == 0);
    REQUIRE_FALSE(std::getline(in, line));

    const std::string volts = io::benchmark_voltages_csv(model, scenarios, rows);
    std::istringstream vin(volts);
    std::getline(vin, line);
    REQUIRE(line == "scheme,scenario_id,bus_id,v");
    int rows_seen = 0;
    while (std::getline(vin, line))
        if (!line.empty()) ++rows_seen;
    REQUIRE(rows_seen == 2 * 2 * 3); // schemes x scenarios x buses
}

TEST_CASE("trajectory CSV leaves q blank at buses without inverters", "[io]") {
    const FeederModel model = sample_model();
    std::mt19937 rng(173);
    const RuleSet rules = vvt::random_stable_rules(rng, model, 0.05);
    const Scenario sc = vvt::random_scenario(rng, model, 0.05);
    Trajectory traj;
    DynamicsOptions opts;
    opts.max_steps = 4;
    opts.tol = 0.0;
    simulate_dynamics(model, rules, sc, opts, &traj);

    const std::string csv = io::trajectory_csv(model, traj);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "step,bus_id,v,q");
    int count = 0, blanks = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++count;
        if (line.back() == ',') ++blanks; // empty q column
    }
    REQUIRE(count == 4 * 3);
    REQUIRE(blanks == 4 * 1); // bus 20 has no inverter

    // Cost trajectories are a bare two-column table.
    const std::string costs = io::cost_trajectory_csv({0.5, 0.25});
    REQUIRE(costs == "iteration,cost\n0,0.5\n1,0.25\n");
}

TEST_CASE("linearization CSV pairs the two models per bus and scenario", "[io]") {
    const FeederModel model = sample_model();
    std::vector<Vec> lin{Vec::Constant(3, 1.01)};
    std::vector<Vec> ac{Vec::Constant(3, 1.012)};
    const std::string csv = io::linearization_csv(model, {7}, lin, ac);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "bus_id,scenario_id,v_lin,v_ac,error");
    std::getline(in, line);
    REQUIRE(line.rfind("10,7,1.01,1.012,", 0) == 0);
}

TEST_CASE("time-series averaging folds windows of scenario rows", "[io]") {
    // Two buses, six time steps, window 3: two averaged scenarios.
    std::ostringstream in;
    in << "scenario_id,bus_id,p_g,p_l,q_l\n";
    for (int t = 0; t < 6; ++t)
        for (int b : {10, 20})
            in << t << "," << b << "," << (t + 1) * 0.1 * (b == 10 ? 1 : 2) << ",0.5,0.1\n";

    const io::AveragedCsv out = io::average_scenarios_csv(in.str(), 3);
    REQUIRE(out.windows == 2);
    REQUIRE_FALSE(out.partial_tail);

    const FeederModel model = sample_model(); // has buses 10, 20, 30
    const ScenarioSet set = io::parse_scenarios_csv(out.csv, model);
    REQUIRE(set.count() == 2);
    // First window: mean of 0.1, 0.2, 0.3 = 0.2 at bus 10; doubled at bus 20.
    REQUIRE(set[0].p_g(model.internal_bus(10)) == Catch::Approx(0.2));
    REQUIRE(set[0].p_g(model.internal_bus(20)) == Catch::Approx(0.4));
    REQUIRE(set[1].p_g(model.internal_bus(10)) == Catch::Approx(0.5));
    REQUIRE(set[0].p_l(model.internal_bus(10)) == Catch::Approx(0.5));

    // A trailing partial window is averaged over what it has and flagged.
    std::ostringstream in2;
    in2 << "scenario_id,bus_id,p_g,p_l,q_l\n";
    for (int t = 0; t < 7; ++t) in2 << t << ",10," << t << ",0,0\n";
    const io::AveragedCsv tail = io::average_scenarios_csv(in2.str(), 3);
    REQUIRE(tail.windows == 3);
    REQUIRE(tail.partial_tail);

    // 120 five-minute steps fold into 24 half-day windows... window 5 -> 24.
    std::ostringstream day;
    day << "scenario_id,bus_id,p_g,p_l,q_l\n";
    for (int t = 0; t < 120; ++t) day << t << ",10,1,0,0\n";
    REQUIRE(io::average_scenarios_csv(day.str(), 5).windows == 24);
    REQUIRE(io::average_scenarios_csv(day.str(), 120).windows == 1);

    REQUIRE_THROWS_AS(io::average_scenarios_csv(day.str(), 0), Error);
    // Bus coverage must be consistent across the steps of a window.
    const std::string ragged =
        "scenario_id,bus_id,p_g,p_l,q_l\n0,10,1,0,0\n1,20,1,0,0\n";
    REQUIRE_THROWS_AS(io::average_scenarios_csv(ragged, 2), Error);
}

TEST_CASE("file helpers round-trip through disk and surface IO errors", "[io]") {
    const auto path = temp_file("vvo_io_roundtrip.json", kFeederJson);
    const FeederTopology topo = io::load_feeder_json(path.string());
    REQUIRE(topo.bus_count == 3);
    std::filesystem::remove(path);

    REQUIRE_THROWS_MATCHES(io::load_feeder_json("/nonexistent/nowhere.json"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.code() == ErrorCode::IoError;
                           }));
    REQUIRE_THROWS_AS(io::write_text("/nonexistent/dir/file.txt", "x"), Error);
}

TEST_CASE("emission is deterministic", "[io]") {
    const FeederModel model = sample_model();
    std::mt19937 rng(179);
    const ScenarioSet scenarios = vvt::random_scenarios(rng, model, 3, 0.1);
    const RuleSet rules = vvt::random_stable_rules(rng, model, 0.05);

    REQUIRE(io::rules_to_json(model, rules) == io::rules_to_json(model, rules));
    REQUIRE(io::scenarios_to_csv(model, scenarios) == io::scenarios_to_csv(model, scenarios));
    const std::vector<Equilibrium> eqs = batch_equilibria(model, rules, scenarios);
    REQUIRE(io::equilibria_to_json(model, eqs) == io::equilibria_to_json(model, eqs));
}
