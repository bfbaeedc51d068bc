#include "rules.hpp"

#include <cmath>

namespace vvo {

namespace {

inline double ramp(double t) { return t > 0.0 ? t : 0.0; }
inline double step(double t) { return t >= 0.0 ? 1.0 : 0.0; }   // right-continuous

} // namespace

double RuleParams::alpha() const {
    if (c <= 0.0) fail(ErrorCode::NonPositiveC, "inverse slope c must be positive");
    return 1.0 / c;
}

void RuleParams::validate() const {
    if (c <= 0.0) fail(ErrorCode::NonPositiveC, "inverse slope c must be positive");
    if (delta < 0.0 || sigma < delta)
        fail(ErrorCode::InvalidArgument, "need 0 <= delta <= sigma");
    if (q_hat <= 0.0)
        fail(ErrorCode::InvalidArgument, "zero-capability inverters must be excluded from G");
    if (q_bar() > q_hat * (1.0 + 1e-12))
        fail(ErrorCode::InvalidArgument, "saturation q_bar exceeds capability q_hat");
}

bool RuleParams::ieee_box_ok() const {
    return v_bar >= 0.95 && v_bar <= 1.05 && delta >= 0.0 && delta <= 0.03 &&
           sigma >= delta + 0.02 && sigma <= 0.18 && c > 0.0 && q_bar() <= q_hat + 1e-12;
}

void NonSymRuleParams::validate() const {
    if (c_p <= 0.0 || c_m <= 0.0) fail(ErrorCode::NonPositiveC, "inverse slopes must be positive");
    if (delta_p < 0.0 || delta_m < 0.0)
        fail(ErrorCode::InvalidArgument, "deadbands must be non-negative");
    if (q_hat <= 0.0)
        fail(ErrorCode::InvalidArgument, "zero-capability inverters must be excluded from G");
    if (q_bar_p < 0.0 || q_bar_m < 0.0 || q_bar_p > q_hat * (1.0 + 1e-12) ||
        q_bar_m > q_hat * (1.0 + 1e-12))
        fail(ErrorCode::InvalidArgument, "branch saturations must lie in [0, q_hat]");
}

double eval(const RuleParams& rule, double v) {
    const double d = v - rule.v_bar;
    const double qb = rule.q_bar();
    if (d > rule.sigma) return -qb;
    if (d > rule.delta) return -(d - rule.delta) / rule.c;
    if (d >= -rule.delta) return 0.0;
    if (d >= -rule.sigma) return -(d + rule.delta) / rule.c;
    return qb;
}

double eval_ramp_form(const RuleParams& rule, double v) {
    const double vb = rule.v_bar, de = rule.delta, si = rule.sigma;
    return (ramp(v - vb - si) - ramp(v - vb - de) + ramp(-v + vb - de) - ramp(-v + vb - si)) /
           rule.c;
}

double eval_nonsym(const NonSymRuleParams& rule, double v) {
    const double d = v - rule.v_bar;
    if (d > 0.0) {
        if (d <= rule.delta_p) return 0.0;
        const double sp = rule.sigma_p();
        if (d > sp) return -rule.q_bar_p;
        return -(d - rule.delta_p) / rule.c_p;
    }
    const double e = -d;
    if (e <= rule.delta_m) return 0.0;
    const double sm = rule.sigma_m();
    if (e > sm) return rule.q_bar_m;
    return (e - rule.delta_m) / rule.c_m;
}

RulePartials partials(const RuleParams& rule, double v) {
    const double vb = rule.v_bar, de = rule.delta, si = rule.sigma, c = rule.c;
    const double u1 = step(v - vb - si);
    const double u2 = step(v - vb - de);
    const double u3 = step(-v + vb - de);
    const double u4 = step(-v + vb - si);

    RulePartials p;
    p.df_dv = (u1 - u2 - u3 + u4) / c;
    p.df_dvbar = (-u1 + u2 + u3 - u4) / c;
    p.df_ddelta = (u2 - u3) / c;
    p.df_dsigma = (u4 - u1) / c;
    p.df_dc = -eval(rule, v) / c;
    return p;
}

NonSymPartials partials_nonsym(const NonSymRuleParams& rule, double v) {
    NonSymPartials p;
    const double d = v - rule.v_bar;
    if (d > 0.0) {
        const double u_in = step(d - rule.delta_p);      // past the deadband
        const double u_sat = step(d - rule.sigma_p());   // past saturation
        const double on_segment = u_in - u_sat;
        p.df_dv = -on_segment / rule.c_p;
        p.df_dvbar = on_segment / rule.c_p;
        p.df_ddelta_p = u_in / rule.c_p;
        p.df_dsigma_p = -u_sat / rule.c_p;
        p.df_dc_p = -eval_nonsym(rule, v) / rule.c_p;
    } else {
        const double e = -d;
        const double u_in = step(e - rule.delta_m);
        const double u_sat = step(e - rule.sigma_m());
        const double on_segment = u_in - u_sat;
        p.df_dv = -on_segment / rule.c_m;
        p.df_dvbar = on_segment / rule.c_m;
        p.df_ddelta_m = -u_in / rule.c_m;
        p.df_dsigma_m = u_sat / rule.c_m;
        p.df_dc_m = -eval_nonsym(rule, v) / rule.c_m;
    }
    return p;
}

double slope(const RuleParams& rule) { return rule.alpha(); }

RuleSet::RuleSet(std::vector<RuleParams> rules) : rules_(std::move(rules)) {
    for (const auto& r : sym()) r.validate();
}

RuleSet::RuleSet(std::vector<NonSymRuleParams> rules) : rules_(std::move(rules)) {
    for (const auto& r : nonsym()) r.validate();
}

int RuleSet::size() const {
    return symmetric() ? static_cast<int>(sym().size()) : static_cast<int>(nonsym().size());
}

const std::vector<RuleParams>& RuleSet::sym() const {
    if (!symmetric()) fail(ErrorCode::InvalidArgument, "rule set is non-symmetric");
    return std::get<std::vector<RuleParams>>(rules_);
}

const std::vector<NonSymRuleParams>& RuleSet::nonsym() const {
    if (symmetric()) fail(ErrorCode::InvalidArgument, "rule set is symmetric");
    return std::get<std::vector<NonSymRuleParams>>(rules_);
}

Vec RuleSet::alphas() const {
    Vec a(size());
    if (symmetric()) {
        const auto& rs = sym();
        for (int i = 0; i < size(); ++i) a(i) = rs[static_cast<size_t>(i)].alpha();
    } else {
        const auto& rs = nonsym();
        for (int i = 0; i < size(); ++i) {
            const auto& r = rs[static_cast<size_t>(i)];
            a(i) = std::max(1.0 / r.c_p, 1.0 / r.c_m);
        }
    }
    return a;
}

Vec RuleSet::q_hats() const {
    Vec q(size());
    if (symmetric()) {
        const auto& rs = sym();
        for (int i = 0; i < size(); ++i) q(i) = rs[static_cast<size_t>(i)].q_hat;
    } else {
        const auto& rs = nonsym();
        for (int i = 0; i < size(); ++i) q(i) = rs[static_cast<size_t>(i)].q_hat;
    }
    return q;
}

RuleSet RuleSet::defaults_1547(const Vec& p_bar) {
    std::vector<RuleParams> rules;
    rules.reserve(static_cast<size_t>(p_bar.size()));
    for (int i = 0; i < p_bar.size(); ++i) {
        RuleParams r;
        r.v_bar = 1.0;
        r.delta = 0.02;
        r.sigma = 0.08;
        r.q_hat = 0.44 * p_bar(i);
        r.c = (r.sigma - r.delta) / r.q_hat;   // q_bar = q_hat
        rules.push_back(r);
    }
    return RuleSet(std::move(rules));
}

Vec to_z(const RuleSet& ruleset) {
    const auto& rs = ruleset.sym();
    const int g = ruleset.size();
    Vec z(4 * g);
    for (int i = 0; i < g; ++i) {
        const auto& r = rs[static_cast<size_t>(i)];
        z(i) = r.v_bar;
        z(g + i) = r.delta;
        z(2 * g + i) = r.sigma;
        z(3 * g + i) = r.c;
    }
    return z;
}

RuleSet from_z(const Vec& z, const Vec& q_hat) {
    if (z.size() % 4 != 0 || z.size() / 4 != q_hat.size())
        fail(ErrorCode::DimensionMismatch, "z must stack 4 blocks of |G| parameters");
    const int g = static_cast<int>(q_hat.size());
    std::vector<RuleParams> rules(static_cast<size_t>(g));
    for (int i = 0; i < g; ++i) {
        auto& r = rules[static_cast<size_t>(i)];
        r.v_bar = z(i);
        r.delta = z(g + i);
        r.sigma = z(2 * g + i);
        r.c = z(3 * g + i);
        r.q_hat = q_hat(i);
        if (r.c <= 0.0) fail(ErrorCode::NonPositiveC, "inverse slope c must be positive");
    }
    return RuleSet(std::move(rules));
}

Vec to_z_nonsym(const RuleSet& ruleset) {
    const auto& rs = ruleset.nonsym();
    const int g = ruleset.size();
    Vec z(7 * g);
    for (int i = 0; i < g; ++i) {
        const auto& r = rs[static_cast<size_t>(i)];
        z(i) = r.v_bar;
        z(g + i) = r.delta_p;
        z(2 * g + i) = r.sigma_p();
        z(3 * g + i) = r.c_p;
        z(4 * g + i) = r.delta_m;
        z(5 * g + i) = r.sigma_m();
        z(6 * g + i) = r.c_m;
    }
    return z;
}

RuleSet from_z_nonsym(const Vec& z, const Vec& q_hat) {
    if (z.size() % 7 != 0 || z.size() / 7 != q_hat.size())
        fail(ErrorCode::DimensionMismatch, "z must stack 7 blocks of |G| parameters");
    const int g = static_cast<int>(q_hat.size());
    std::vector<NonSymRuleParams> rules(static_cast<size_t>(g));
    for (int i = 0; i < g; ++i) {
        auto& r = rules[static_cast<size_t>(i)];
        r.v_bar = z(i);
        r.delta_p = z(g + i);
        r.c_p = z(3 * g + i);
        r.delta_m = z(4 * g + i);
        r.c_m = z(6 * g + i);
        if (r.c_p <= 0.0 || r.c_m <= 0.0)
            fail(ErrorCode::NonPositiveC, "inverse slopes must be positive");
        r.q_bar_p = (z(2 * g + i) - r.delta_p) / r.c_p;
        r.q_bar_m = (z(5 * g + i) - r.delta_m) / r.c_m;
        r.q_hat = q_hat(i);
    }
    return RuleSet(std::move(rules));
}

} // namespace vvo
