#pragma once

#include <variant>
#include <vector>

#include "feeder.hpp"

namespace vvo {

/// Symmetric Volt/VAR curve. The droop segment has inverse slope
/// c = 1/alpha = (sigma - delta) / q_bar; q_bar is derived, never stored.
struct RuleParams {
    double v_bar = 1.0;    // reference voltage, pu
    double delta = 0.02;   // deadband half-width, pu
    double sigma = 0.08;   // saturation half-width, pu
    double c = 1.0;        // inverse slope, pu/pu
    double q_hat = 0.0;    // inverter capability, pu

    double q_bar() const { return (sigma - delta) / c; }
    double alpha() const;

    /// Basic sanity (c > 0, ordered breakpoints, q_bar within capability).
    void validate() const;
    /// Whether the parameters sit inside the IEEE 1547 box.
    bool ieee_box_ok() const;
};

/// Non-symmetric curve: independent deadband/slope/saturation per side.
/// The "+" branch shapes the response for v > v_bar (reactive absorption,
/// q in [-q_bar_p, 0]); the "-" branch for v < v_bar (q in [0, q_bar_m]).
struct NonSymRuleParams {
    double v_bar = 1.0;
    double delta_p = 0.02, c_p = 1.0, q_bar_p = 0.0;
    double delta_m = 0.02, c_m = 1.0, q_bar_m = 0.0;
    double q_hat = 0.0;

    double sigma_p() const { return q_bar_p * c_p + delta_p; }
    double sigma_m() const { return q_bar_m * c_m + delta_m; }
    void validate() const;
};

/// Reactive setpoint for a local voltage (piecewise-affine curve).
double eval(const RuleParams& rule, double v);
double eval_nonsym(const NonSymRuleParams& rule, double v);

/// Same curve written as a sum of four unit-ramp terms; used as the
/// independent route in tests.
double eval_ramp_form(const RuleParams& rule, double v);

/// Partial derivatives of eval at v. Step functions are taken
/// right-continuous (u(0) = 1) at the curve breakpoints.
struct RulePartials {
    double df_dv = 0.0;
    double df_dvbar = 0.0;
    double df_ddelta = 0.0;
    double df_dsigma = 0.0;
    double df_dc = 0.0;
};

RulePartials partials(const RuleParams& rule, double v);

/// Branch-wise partials of eval_nonsym, same step convention and the same
/// parameter roles as the symmetric case: each branch is differentiated in
/// (delta, sigma, c) with its saturation level (sigma - delta) / c derived.
struct NonSymPartials {
    double df_dv = 0.0;
    double df_dvbar = 0.0;
    double df_ddelta_p = 0.0;
    double df_dsigma_p = 0.0;
    double df_dc_p = 0.0;
    double df_ddelta_m = 0.0;
    double df_dsigma_m = 0.0;
    double df_dc_m = 0.0;
};

NonSymPartials partials_nonsym(const NonSymRuleParams& rule, double v);

double slope(const RuleParams& rule);

/// One Volt/VAR curve per inverter bus, aligned with FeederModel::inverters().
class RuleSet {
public:
    RuleSet() = default;
    RuleSet(std::vector<RuleParams> rules);
    RuleSet(std::vector<NonSymRuleParams> rules);

    bool symmetric() const { return std::holds_alternative<std::vector<RuleParams>>(rules_); }
    int size() const;

    const std::vector<RuleParams>& sym() const;
    const std::vector<NonSymRuleParams>& nonsym() const;

    /// Slopes alpha_n (for non-symmetric rules, max of the two branches).
    Vec alphas() const;
    Vec q_hats() const;

    /// Default IEEE settings: v_bar=1, delta=0.02, sigma=0.08,
    /// q_bar = q_hat = 0.44 * p_bar.
    static RuleSet defaults_1547(const Vec& p_bar);

private:
    std::variant<std::vector<RuleParams>, std::vector<NonSymRuleParams>> rules_;
};

/// Stacked parameter vector z = (v_bar, delta, sigma, c), block per
/// parameter type over the inverter set. Loses q_hat, which rides along
/// separately.
Vec to_z(const RuleSet& ruleset);
RuleSet from_z(const Vec& z, const Vec& q_hat);

/// Non-symmetric stacking [vbar; delta+; sigma+; c+; delta-; sigma-; c-],
/// 7|G| entries; branch saturations are recovered as (sigma - delta) / c.
Vec to_z_nonsym(const RuleSet& ruleset);
RuleSet from_z_nonsym(const Vec& z, const Vec& q_hat);

} // namespace vvo
