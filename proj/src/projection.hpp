#pragma once

#include <vector>

#include "feeder.hpp"
#include "rules.hpp"

namespace vvo {

/// Feasible rule-parameter set Z_eps for a feeder. Symmetric rules use one
/// droop branch (z = [vbar; delta; sigma; c], 4|G| entries); non-symmetric
/// rules use two (z = [vbar; delta+; sigma+; c+; delta-; sigma-; c-],
/// 7|G| entries). Per inverter n and branch b:
///   0.95 <= vbar_n <= 1.05
///   0    <= delta_n^b <= 0.03
///   delta_n^b + 0.02 <= sigma_n^b <= 0.18
///   sigma_n^b - delta_n^b <= q_hat_n c_n^b
///   c_n^b >= l_n           with l = (1/(1-eps)) X_GG 1
///   sum_m X_nm max_b(1 / c_m^b) <= 1 - eps
/// The coupled family is handled through auxiliaries a with X a <= (1-eps) 1
/// and a_n c_n^b >= 1 (rotated-cone form), one cone per branch.
struct FeasibleSetSpec {
    double eps = 0.01;
    Mat x_gg;
    Vec q_hat;
    Vec c_lower;       // (1/(1-eps)) X_GG 1
    int branches = 1;  // 1 = symmetric rules, 2 = non-symmetric
    Vec witness;       // one verified point of Z_eps, stacked like z

    static FeasibleSetSpec build(const Mat& x_gg, const Vec& q_hat, double eps);
    static FeasibleSetSpec build_nonsym(const Mat& x_gg, const Vec& q_hat, double eps);

    int inverter_count() const { return static_cast<int>(q_hat.size()); }
    int dim() const { return (1 + 3 * branches) * inverter_count(); }

    /// Largest violation of the set definition at z (coupled family in its
    /// pre-cone form, evaluated directly). Zero means feasible.
    double violation(const Vec& z) const;
};

struct ProjectionStats {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

/// Euclidean projector onto Z_eps via consensus ADMM over closed-form
/// block projections. Stateful: consecutive calls warm-start from the
/// previous primal/dual variables (one instance per optimization run).
class Projector {
public:
    explicit Projector(FeasibleSetSpec spec);

    /// argmin_{z in Z_eps} ||x - z||^2.
    Vec project(const Vec& x);

    const FeasibleSetSpec& spec() const { return spec_; }
    const ProjectionStats& last_stats() const { return stats_; }

    double tol = 1e-9;
    int max_iters = 200000;

private:
    void cold_start(const Vec& x);
    void scale_duals(double factor);

    FeasibleSetSpec spec_;
    ProjectionStats stats_;
    bool warm_ = false;

    // Consensus variable: w = [per branch: delta, sigma, c; then a], each
    // segment of length |G| (vbar decouples and is clamped analytically).
    Vec w_;
    // Block-local copies and scaled duals; branch-indexed arrays use slot
    // b*|G|+n.
    Vec trap_d_, trap_s_, trap_ud_, trap_us_;                    // trapezoid (delta, sigma)
    Vec half_d_, half_s_, half_c_, half_ud_, half_us_, half_uc_; // sigma-delta <= q_hat c
    Vec cb_c_, cb_uc_;                                           // c >= l
    Mat row_a_, row_ua_;                                         // X a <= (1-eps)1, row blocks
    Vec hyp_a_, hyp_c_, hyp_ua_, hyp_uc_;                        // a c >= 1
    // Diagonal preconditioning: the splitting runs on c/c_scale and
    // a*c_scale so every consensus coordinate is O(1); without it the c and
    // a scales differ by orders of magnitude and no single penalty works.
    Vec c_scale_;
    Mat x_scaled_; // x_gg * diag(1/c_scale), row constraints in scaled a
    double rho_ = 1.0;
};

/// Projection of a scalar pair onto {(a, c): a c >= 1, a > 0, c > 0}.
/// Exposed for direct testing.
void project_hyperbola(double a0, double c0, double& a, double& c);

/// Feasibility posture after the splitting solve: clamp the analytic boxes,
/// then raise c minimally so every constraint holds exactly (moves of
/// solver-tolerance size). Applied by Projector::project before returning.
Vec polish_feasible(const FeasibleSetSpec& spec, Vec z);

} // namespace vvo
