/*
 * voltvar — feeder Volt/VAR curve design, stability certification and
 * benchmarking behind a plain C interface.
 *
 * Conventions:
 *  - Every fallible call returns a vv_status; VV_OK is zero. On failure,
 *    vv_last_error() returns a thread-local description valid until the
 *    next library call on the same thread.
 *  - Objects are opaque handles created by *_parse/_load/_defaults calls
 *    and released with the matching *_free. Handles are immutable after
 *    creation and may be shared across threads.
 *  - Output strings (char**) are heap copies owned by the caller; release
 *    them with vv_string_free. Output parameters are written only on VV_OK.
 */

#ifndef VOLTVAR_H
#define VOLTVAR_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vv_status {
    VV_OK = 0,
    VV_ERR_VALIDATION = 1, /* malformed input, bad dimensions, infeasible request */
    VV_ERR_IO = 2,         /* file could not be read or written */
    VV_ERR_SOLVER = 3,     /* iteration cap, divergence, or singular system */
    VV_ERR_INTERNAL = 4    /* unexpected failure; report as a bug */
} vv_status;

typedef struct vv_feeder vv_feeder;       /* radial feeder + sensitivity matrices */
typedef struct vv_scenarios vv_scenarios; /* injection scenarios + grid conditions */
typedef struct vv_rules vv_rules;         /* one Volt/VAR curve per inverter */

const char* vv_version(void);
const char* vv_last_error(void);
void vv_string_free(char* s);

/* ---- feeder ---------------------------------------------------------- */
/* JSON: {v0, buses:[{id,parent,r,x}], inverters:[ids], q_hat:[], p_bar:[]} */
vv_status vv_feeder_parse_json(const char* text, vv_feeder** out);
vv_status vv_feeder_load_json(const char* path, vv_feeder** out);
void vv_feeder_free(vv_feeder* feeder);
int vv_feeder_bus_count(const vv_feeder* feeder);      /* -1 on NULL */
int vv_feeder_inverter_count(const vv_feeder* feeder); /* -1 on NULL */

/* ---- scenarios ------------------------------------------------------- */
/* CSV header: scenario_id,bus_id,p_g,p_l,q_l. Buses a scenario omits
 * carry zero injections. */
vv_status vv_scenarios_parse_csv(const vv_feeder* feeder, const char* text, vv_scenarios** out);
vv_status vv_scenarios_load_csv(const vv_feeder* feeder, const char* path, vv_scenarios** out);
void vv_scenarios_free(vv_scenarios* scenarios);
int vv_scenarios_count(const vv_scenarios* scenarios); /* -1 on NULL */
vv_status vv_scenarios_to_csv(const vv_feeder* feeder, const vv_scenarios* scenarios,
                              char** out_csv);

/* Average a high-resolution scenario CSV over blocks of `window` time
 * steps, producing one scenario per block. out_partial_tail reports a
 * trailing window shorter than `window` (averaged over what it has). */
vv_status vv_scenarios_average_csv(const char* text, int window, char** out_csv,
                                   int* out_windows, int* out_partial_tail);

/* ---- rules ----------------------------------------------------------- */
/* JSON array, one object per inverter bus:
 *   symmetric:     {bus, v_bar, delta, sigma, c, q_bar, q_hat}
 *   two-branch:    {bus, v_bar, delta_p, sigma_p, c_p, q_bar_p,
 *                   delta_m, sigma_m, c_m, q_bar_m, q_hat}
 * q_bar fields are informational on output and ignored on input. */
vv_status vv_rules_parse_json(const vv_feeder* feeder, const char* text, vv_rules** out);
vv_status vv_rules_load_json(const vv_feeder* feeder, const char* path, vv_rules** out);
/* IEEE 1547 default curve per inverter (v_bar=1, delta=0.02, sigma=0.08,
 * q_bar = q_hat = 0.44 p_bar). */
vv_status vv_rules_defaults(const vv_feeder* feeder, vv_rules** out);
void vv_rules_free(vv_rules* rules);
vv_status vv_rules_to_json(const vv_feeder* feeder, const vv_rules* rules, char** out_json);

/* ---- analysis -------------------------------------------------------- */
/* Closed-loop stability of the curve slopes on this feeder. out_stable
 * carries the exact spectral verdict (1 stable, 0 not); the JSON also
 * reports the linear sufficient conditions and their violated rows. */
vv_status vv_stability_check(const vv_feeder* feeder, const vv_rules* rules, double eps,
                             char** out_json, int* out_stable);

/* Optimize the curves over the scenario set. config_json may be NULL or
 * "{}"; recognized keys (all optional): eps, step, rel_tol, cost_floor,
 * max_iters, backtracking, max_backtracks, nonsymmetric, multistart, seed,
 * workers, prox_tol, prox_max_iters. Unknown keys are rejected.
 * out_rules may be NULL when only the report is wanted. */
vv_status vv_design(const vv_feeder* feeder, const vv_scenarios* scenarios,
                    const char* config_json, char** out_report_json, vv_rules** out_rules);

/* Volt/VAR dynamics on one scenario (by position in the set). The CSV has
 * header step,bus_id,v,q; out_eq_json (optional, pass NULL to skip) carries
 * the terminal state in the equilibria JSON shape; out_converged reports
 * whether the update settled within max_steps (the trajectory is returned
 * either way). Pass max_steps/tol <= 0 for the library defaults. */
vv_status vv_simulate(const vv_feeder* feeder, const vv_rules* rules,
                      const vv_scenarios* scenarios, int scenario_index, int max_steps,
                      double tol, char** out_csv, char** out_eq_json, int* out_converged);

/* Equilibrium per scenario as a JSON array (method, iterations, residual,
 * converged, bus, q, v). */
vv_status vv_equilibria(const vv_feeder* feeder, const vv_rules* rules,
                        const vv_scenarios* scenarios, int workers, char** out_json);

/* Benchmark table over the standard schemes: a1 unit power factor, a2
 * per-scenario optimal, a3 stochastic single dispatch, a4 IEEE defaults,
 * plus `designed` when rules is non-NULL. out_table_csv has header
 * scheme,vdm,max_abs_dev,band_violations; out_voltages_csv (optional,
 * pass NULL to skip) dumps every voltage profile. */
vv_status vv_compare(const vv_feeder* feeder, const vv_scenarios* scenarios,
                     const vv_rules* rules, double eps, int workers, char** out_table_csv,
                     char** out_voltages_csv);

/* Evaluate one rule set on a scenario set (typically out-of-sample):
 * JSON with vdm, max_abs_dev, band_violations and a stability block. */
vv_status vv_evaluate(const vv_feeder* feeder, const vv_rules* rules,
                      const vv_scenarios* scenarios, double eps, int workers, char** out_json);

/* Compare the linearized model against a full AC power-flow solution on
 * every scenario. With rules == NULL both sides run at unit power factor;
 * otherwise both sides run the closed Volt/VAR loop. CSV header:
 * bus_id,scenario_id,v_lin,v_ac,error. */
vv_status vv_validate_linearization(const vv_feeder* feeder, const vv_rules* rules,
                                    const vv_scenarios* scenarios, char** out_csv,
                                    double* out_max_error);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* VOLTVAR_H */
