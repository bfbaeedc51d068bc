#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>
#include <voltvar/voltvar.h>

using nlohmann::json;

namespace {

/// RAII wrappers over the C handles and strings.
template <typename T, void (*FreeFn)(T*)>
struct Handle {
    T* ptr = nullptr;
    Handle() = default;
    explicit Handle(T* p) : ptr(p) {}
    ~Handle() { FreeFn(ptr); }
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    Handle(Handle&& other) noexcept : ptr(other.ptr) { other.ptr = nullptr; }
    T** out() { return &ptr; }
    operator T*() const { return ptr; }
};

using Feeder = Handle<vv_feeder, vv_feeder_free>;
using Scenarios = Handle<vv_scenarios, vv_scenarios_free>;
using Rules = Handle<vv_rules, vv_rules_free>;

struct CStr {
    char* p = nullptr;
    ~CStr() { vv_string_free(p); }
    char** out() { return &p; }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

const char* kToyFeeder = R"({
  "v0": 1.0,
  "buses": [
    {"id": 1, "parent": 0, "r": 0.05, "x": 1.0},
    {"id": 2, "parent": 1, "r": 0.05, "x": 1.0}
  ],
  "inverters": [1, 2],
  "q_hat": [1.0, 1.0],
  "p_bar": [1.0, 1.0]
})";

const char* kToyScenarios =
    "scenario_id,bus_id,p_g,p_l,q_l\n"
    "1,1,0.02,0.01,0.004\n"
    "1,2,0.03,0.02,0.008\n"
    "2,1,0.05,0.01,0.002\n"
    "2,2,0.01,0.03,0.010\n";

/// Curves realizing the slope pair (1/2, 1/3) that defeats the spectral test.
const char* kCounterexampleRules = R"([
  {"bus": 1, "v_bar": 1.0, "delta": 0.0, "sigma": 0.5, "c": 2.0, "q_bar": 0.25, "q_hat": 1.0},
  {"bus": 2, "v_bar": 1.0, "delta": 0.0, "sigma": 0.5, "c": 3.0, "q_bar": 0.1666, "q_hat": 1.0}
])";

Feeder toy() {
    Feeder f;
    REQUIRE(vv_feeder_parse_json(kToyFeeder, f.out()) == VV_OK);
    return f;
}

} // namespace

TEST_CASE("version and error strings behave", "[capi]") {
    REQUIRE(vv_version() != nullptr);
    REQUIRE(std::strlen(vv_version()) > 0);
    vv_string_free(nullptr); // must be a no-op
}

TEST_CASE("feeder lifecycle and validation errors", "[capi]") {
    Feeder f = toy();
    REQUIRE(vv_feeder_bus_count(f) == 2);
    REQUIRE(vv_feeder_inverter_count(f) == 2);
    REQUIRE(vv_feeder_bus_count(nullptr) == -1);

    vv_feeder* out = nullptr;
    REQUIRE(vv_feeder_parse_json("{broken", &out) == VV_ERR_VALIDATION);
    REQUIRE(out == nullptr);
    REQUIRE(std::strlen(vv_last_error()) > 0);
    REQUIRE(vv_feeder_parse_json(nullptr, &out) == VV_ERR_VALIDATION);
    REQUIRE(vv_feeder_parse_json(kToyFeeder, nullptr) == VV_ERR_VALIDATION);
    REQUIRE(vv_feeder_load_json("/no/such/file.json", &out) == VV_ERR_IO);
}

TEST_CASE("scenario handles parse, count, and round-trip", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);
    REQUIRE(vv_scenarios_count(s) == 2);

    CStr csv;
    REQUIRE(vv_scenarios_to_csv(f, s, csv.out()) == VV_OK);
    Scenarios back;
    REQUIRE(vv_scenarios_parse_csv(f, csv.p, back.out()) == VV_OK);
    CStr csv2;
    REQUIRE(vv_scenarios_to_csv(f, back, csv2.out()) == VV_OK);
    REQUIRE(csv.str() == csv2.str());

    vv_scenarios* bad = nullptr;
    REQUIRE(vv_scenarios_parse_csv(f, "not,a,scenario\n", &bad) == VV_ERR_VALIDATION);

    CStr avg;
    int windows = 0, partial = 0;
    REQUIRE(vv_scenarios_average_csv(kToyScenarios, 2, avg.out(), &windows, &partial) ==
            VV_OK);
    REQUIRE(windows == 1);
    REQUIRE(partial == 0);
    REQUIRE(vv_scenarios_average_csv(kToyScenarios, 0, avg.out(), &windows, &partial) ==
            VV_ERR_VALIDATION);
}

TEST_CASE("rules parse, defaults, and serialize", "[capi]") {
    Feeder f = toy();
    Rules defaults;
    REQUIRE(vv_rules_defaults(f, defaults.out()) == VV_OK);
    CStr doc;
    REQUIRE(vv_rules_to_json(f, defaults, doc.out()) == VV_OK);
    const json arr = json::parse(doc.str());
    REQUIRE(arr.size() == 2);
    REQUIRE(arr[0]["v_bar"].get<double>() == 1.0);
    REQUIRE(arr[0]["delta"].get<double>() == 0.02);
    REQUIRE(arr[0]["sigma"].get<double>() == 0.08);
    REQUIRE(arr[0]["q_hat"].get<double>() == Catch::Approx(0.44));

    Rules parsed;
    REQUIRE(vv_rules_parse_json(f, kCounterexampleRules, parsed.out()) == VV_OK);
    vv_rules* bad = nullptr;
    REQUIRE(vv_rules_parse_json(f, "[]", &bad) == VV_ERR_VALIDATION);
}

TEST_CASE("stability check reproduces the counterexample verdict", "[capi]") {
    Feeder f = toy();
    Rules rules;
    REQUIRE(vv_rules_parse_json(f, kCounterexampleRules, rules.out()) == VV_OK);

    CStr doc;
    int stable = 7;
    REQUIRE(vv_stability_check(f, rules, 0.0, doc.out(), &stable) == VV_OK);
    REQUIRE(stable == 0);
    const json rep = json::parse(doc.str());
    REQUIRE(rep["spectral_norm"].get<double>() == Catch::Approx(1.014).margin(1e-3));
    REQUIRE_FALSE(rep["spectral_ok"].get<bool>());
    REQUIRE_FALSE(rep["polytope_ok"].get<bool>());
    REQUIRE(rep["violated_family1"] == json::array({1})); // 0-based row indices
    REQUIRE(rep["violated_family2"].empty());

    // Defaults on this stiff feeder are unstable as well.
    Rules defaults;
    REQUIRE(vv_rules_defaults(f, defaults.out()) == VV_OK);
    REQUIRE(vv_stability_check(f, defaults, 0.0, nullptr, &stable) == VV_OK);
    REQUIRE(stable == 0);

    REQUIRE(vv_stability_check(f, rules, 1.5, doc.out(), &stable) == VV_ERR_VALIDATION);
}

TEST_CASE("design produces certified rules end to end", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);

    CStr report;
    Rules designed;
    REQUIRE(vv_design(f, s, R"({"eps": 0.05, "max_iters": 4000, "seed": 3})",
                      report.out(), designed.out()) == VV_OK);
    const json rep = json::parse(report.str());
    REQUIRE(rep["stability"]["polytope_ok"].get<bool>());
    REQUIRE(rep["final_cost"].get<double>() >= 0.0);
    REQUIRE(rep["stability"]["eps"].get<double>() == 0.05);

    int stable = 0;
    REQUIRE(vv_stability_check(f, designed, 0.05, nullptr, &stable) == VV_OK);
    REQUIRE(stable == 1);

    // The designed handle drives the rest of the API.
    CStr eqs;
    REQUIRE(vv_equilibria(f, designed, s, 1, eqs.out()) == VV_OK);
    REQUIRE(json::parse(eqs.str()).size() == 2);

    CStr table;
    REQUIRE(vv_compare(f, s, designed, 0.05, 1, table.out(), nullptr) == VV_OK);
    REQUIRE(table.str().find("designed,") != std::string::npos);

    // Config validation.
    CStr out;
    REQUIRE(vv_design(f, s, R"({"bogus_key": 1})", out.out(), nullptr) ==
            VV_ERR_VALIDATION);
    REQUIRE(std::string(vv_last_error()).find("bogus_key") != std::string::npos);
    REQUIRE(vv_design(f, s, R"({"eps": 2.0})", out.out(), nullptr) == VV_ERR_VALIDATION);
    REQUIRE(vv_design(f, s, "[1,2]", out.out(), nullptr) == VV_ERR_VALIDATION);
}

TEST_CASE("simulate returns trajectories and flags divergence", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);

    // Unstable counterexample rules: the loop must not settle.
    Rules unstable;
    REQUIRE(vv_rules_parse_json(f, kCounterexampleRules, unstable.out()) == VV_OK);
    CStr csv, eq;
    int converged = 1;
    REQUIRE(vv_simulate(f, unstable, s, 0, 60, 1e-9, csv.out(), eq.out(), &converged) ==
            VV_OK);
    REQUIRE(converged == 0);
    REQUIRE(csv.str().rfind("step,bus_id,v,q", 0) == 0);
    REQUIRE_FALSE(json::parse(eq.str())[0]["converged"].get<bool>());

    // A designed set settles and reports the equilibrium.
    CStr report;
    Rules designed;
    REQUIRE(vv_design(f, s, R"({"eps": 0.05, "max_iters": 2000})", report.out(),
                      designed.out()) == VV_OK);
    REQUIRE(vv_simulate(f, designed, s, 1, 0, 0.0, csv.out(), eq.out(), &converged) ==
            VV_OK);
    REQUIRE(converged == 1);
    const json eq_doc = json::parse(eq.str());
    REQUIRE(eq_doc[0]["method"] == "dynamics");
    REQUIRE(eq_doc[0]["converged"].get<bool>());

    REQUIRE(vv_simulate(f, designed, s, 5, 0, 0.0, csv.out(), nullptr, &converged) ==
            VV_ERR_VALIDATION); // scenario index out of range
}

TEST_CASE("compare emits four or five schemes", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);

    CStr table, volts;
    REQUIRE(vv_compare(f, s, nullptr, 0.01, 1, table.out(), volts.out()) == VV_OK);
    const std::string t = table.str();
    for (const char* scheme : {"a1,", "a2,", "a3,", "a4,"})
        REQUIRE(t.find(scheme) != std::string::npos);
    REQUIRE(t.find("designed,") == std::string::npos);
    REQUIRE(volts.str().rfind("scheme,scenario_id,bus_id,v", 0) == 0);
}

TEST_CASE("evaluate reports metrics with a stability block", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);
    CStr report;
    Rules designed;
    REQUIRE(vv_design(f, s, R"({"eps": 0.05, "max_iters": 1000})", report.out(),
                      designed.out()) == VV_OK);
    CStr doc;
    REQUIRE(vv_evaluate(f, designed, s, 0.05, 1, doc.out()) == VV_OK);
    const json ev = json::parse(doc.str());
    REQUIRE(ev["vdm"].get<double>() >= 0.0);
    REQUIRE(ev["stability"]["polytope_ok"].get<bool>());
    REQUIRE(ev["scheme"] == "designed");
}

TEST_CASE("linearization check runs with and without rules", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);

    CStr csv;
    double max_err = -1.0;
    REQUIRE(vv_validate_linearization(f, nullptr, s, csv.out(), &max_err) == VV_OK);
    REQUIRE(max_err >= 0.0);
    REQUIRE(csv.str().rfind("bus_id,scenario_id,v_lin,v_ac,error", 0) == 0);

    CStr report;
    Rules designed;
    REQUIRE(vv_design(f, s, R"({"eps": 0.05, "max_iters": 1000})", report.out(),
                      designed.out()) == VV_OK);
    double closed_err = -1.0;
    REQUIRE(vv_validate_linearization(f, designed, s, csv.out(), &closed_err) == VV_OK);
    REQUIRE(closed_err >= 0.0);
    REQUIRE(closed_err < 0.05); // light loading keeps the models close
}

TEST_CASE("null handles are rejected uniformly", "[capi]") {
    Feeder f = toy();
    Scenarios s;
    REQUIRE(vv_scenarios_parse_csv(f, kToyScenarios, s.out()) == VV_OK);
    CStr out;
    int flag = 0;
    REQUIRE(vv_stability_check(nullptr, nullptr, 0.0, out.out(), &flag) ==
            VV_ERR_VALIDATION);
    REQUIRE(vv_design(nullptr, s, nullptr, out.out(), nullptr) == VV_ERR_VALIDATION);
    REQUIRE(vv_simulate(f, nullptr, s, 0, 0, 0.0, out.out(), nullptr, &flag) ==
            VV_ERR_VALIDATION);
    REQUIRE(vv_compare(f, nullptr, nullptr, 0.01, 1, out.out(), nullptr) ==
            VV_ERR_VALIDATION);
    REQUIRE(vv_equilibria(f, nullptr, s, 1, out.out()) == VV_ERR_VALIDATION);
}
