#include "projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vvo {

namespace {

// IEEE 1547 parameter boxes shared by the set definition and the polish.
constexpr double kVbarLo = 0.95, kVbarHi = 1.05;
constexpr double kDeltaLo = 0.0, kDeltaHi = 0.03;
constexpr double kGap = 0.02;     // sigma >= delta + 0.02
constexpr double kSigmaHi = 0.18;

/// Exact projection onto {0 <= d <= 0.03, d + 0.02 <= s <= 0.18}: test
/// membership, otherwise take the nearest point over the four edges.
void project_trapezoid(double d0, double s0, double& d, double& s) {
    if (d0 >= kDeltaLo && d0 <= kDeltaHi && s0 >= d0 + kGap && s0 <= kSigmaHi) {
        d = d0;
        s = s0;
        return;
    }
    struct Pt {
        double d, s;
    };
    constexpr Pt verts[4] = {{kDeltaLo, kDeltaLo + kGap},
                             {kDeltaHi, kDeltaHi + kGap},
                             {kDeltaHi, kSigmaHi},
                             {kDeltaLo, kSigmaHi}};
    double best = std::numeric_limits<double>::infinity();
    for (int e = 0; e < 4; ++e) {
        const Pt a = verts[e], b = verts[(e + 1) % 4];
        const double ex = b.d - a.d, ey = b.s - a.s;
        double t = ((d0 - a.d) * ex + (s0 - a.s) * ey) / (ex * ex + ey * ey);
        t = std::clamp(t, 0.0, 1.0);
        const double pd = a.d + t * ex, ps = a.s + t * ey;
        const double dist = (pd - d0) * (pd - d0) + (ps - s0) * (ps - s0);
        if (dist < best) {
            best = dist;
            d = pd;
            s = ps;
        }
    }
}

inline double psi(double a, double a0, double c0) { return a * a * a * (a - a0) + c0 * a - 1.0; }

FeasibleSetSpec build_spec(const Mat& x_gg, const Vec& q_hat, double eps, int branches) {
    if (x_gg.rows() != x_gg.cols() || x_gg.rows() != q_hat.size())
        fail(ErrorCode::DimensionMismatch, "q_hat must match the inverter block of X");
    if (eps < 0.0 || eps >= 1.0)
        fail(ErrorCode::InvalidArgument, "stability margin eps must lie in [0, 1)");
    for (int n = 0; n < q_hat.size(); ++n)
        if (q_hat(n) <= 0.0)
            fail(ErrorCode::InvalidArgument, "zero-capability inverters cannot carry rules");

    FeasibleSetSpec spec;
    spec.eps = eps;
    spec.x_gg = x_gg;
    spec.q_hat = q_hat;
    spec.branches = branches;
    spec.c_lower = (x_gg * Vec::Ones(x_gg.rows())) / (1.0 - eps);

    const int g = static_cast<int>(q_hat.size());
    Vec c(g);
    for (int n = 0; n < g; ++n) c(n) = std::max(spec.c_lower(n), kSigmaHi / q_hat(n));
    // Scale c up so the coupled row constraints hold as well; scaling
    // preserves every other constraint.
    const Vec inv_c = c.cwiseInverse();
    double worst = 0.0;
    for (int n = 0; n < g; ++n) worst = std::max(worst, x_gg.row(n).dot(inv_c));
    c *= std::max(1.0, worst / (1.0 - eps));

    spec.witness = Vec(spec.dim());
    for (int n = 0; n < g; ++n) {
        spec.witness(n) = 1.0;
        for (int b = 0; b < branches; ++b) {
            spec.witness((1 + 3 * b) * g + n) = 0.0;
            spec.witness((2 + 3 * b) * g + n) = kSigmaHi;
            spec.witness((3 + 3 * b) * g + n) = c(n);
        }
    }
    if (spec.violation(spec.witness) > 1e-9)
        fail(ErrorCode::Infeasible, "feasible-set witness failed its constraint check");
    return spec;
}

} // namespace

void project_hyperbola(double a0, double c0, double& a, double& c) {
    if (a0 > 0.0 && c0 > 0.0 && a0 * c0 >= 1.0) {
        a = a0;
        c = c0;
        return;
    }
    // The projection lies on a c = 1 with a >= max(a0, 0) and 1/a >= c0;
    // psi has exactly one root in that bracket (uniqueness of projection).
    double lo = std::max(a0, 0.0);
    double hi;
    if (c0 > 0.0) {
        hi = 1.0 / c0;
    } else {
        hi = std::max(1.0, 2.0 * lo + 1.0);
        while (psi(hi, a0, c0) <= 0.0) hi *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = psi(x, a0, c0);
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
        const double df = 4.0 * x * x * x - 3.0 * a0 * x * x + c0;
        double next = df != 0.0 ? x - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    a = x;
    c = 1.0 / x;
}

FeasibleSetSpec FeasibleSetSpec::build(const Mat& x_gg, const Vec& q_hat, double eps) {
    return build_spec(x_gg, q_hat, eps, 1);
}

FeasibleSetSpec FeasibleSetSpec::build_nonsym(const Mat& x_gg, const Vec& q_hat, double eps) {
    return build_spec(x_gg, q_hat, eps, 2);
}

double FeasibleSetSpec::violation(const Vec& z) const {
    const int g = inverter_count();
    if (z.size() != dim())
        fail(ErrorCode::DimensionMismatch, "z does not match the parameter layout");
    double worst = 0.0;
    Vec slope_bound = Vec::Zero(g);   // max_b 1/c^b per inverter
    for (int n = 0; n < g; ++n) {
        const double vb = z(n);
        worst = std::max({worst, kVbarLo - vb, vb - kVbarHi});
        for (int b = 0; b < branches; ++b) {
            const double de = z((1 + 3 * b) * g + n);
            const double si = z((2 + 3 * b) * g + n);
            const double c = z((3 + 3 * b) * g + n);
            worst = std::max({worst, kDeltaLo - de, de - kDeltaHi});
            worst = std::max({worst, de + kGap - si, si - kSigmaHi});
            worst = std::max(worst, si - de - q_hat(n) * c);
            worst = std::max(worst, c_lower(n) - c);
            if (c <= 0.0) return std::numeric_limits<double>::infinity();
            slope_bound(n) = std::max(slope_bound(n), 1.0 / c);
        }
    }
    const Vec rows = x_gg * slope_bound;
    for (int n = 0; n < g; ++n) worst = std::max(worst, rows(n) - (1.0 - eps));
    return worst;
}

Vec polish_feasible(const FeasibleSetSpec& spec, Vec z) {
    const int g = spec.inverter_count();
    for (int n = 0; n < g; ++n) {
        z(n) = std::clamp(z(n), kVbarLo, kVbarHi);
        for (int b = 0; b < spec.branches; ++b) {
            double& de = z((1 + 3 * b) * g + n);
            double& si = z((2 + 3 * b) * g + n);
            double& c = z((3 + 3 * b) * g + n);
            de = std::clamp(de, kDeltaLo, kDeltaHi);
            si = std::clamp(si, de + kGap, kSigmaHi);
            c = std::max({c, spec.c_lower(n), (si - de) / spec.q_hat(n)});
        }
    }
    double worst = 0.0;
    for (int n = 0; n < g; ++n) {
        double row = 0.0;
        for (int m = 0; m < g; ++m) {
            double bound = 0.0;
            for (int b = 0; b < spec.branches; ++b)
                bound = std::max(bound, 1.0 / z((3 + 3 * b) * g + m));
            row += spec.x_gg(n, m) * bound;
        }
        worst = std::max(worst, row);
    }
    const double kappa = std::max(1.0, worst / (1.0 - spec.eps));
    if (kappa > 1.0)
        for (int n = 0; n < g; ++n)
            for (int b = 0; b < spec.branches; ++b) z((3 + 3 * b) * g + n) *= kappa;
    return z;
}

Projector::Projector(FeasibleSetSpec spec) : spec_(std::move(spec)) {
    const int g = spec_.inverter_count();
    c_scale_ = Vec(g);
    for (int n = 0; n < g; ++n)
        c_scale_(n) = std::max(spec_.c_lower(n), kGap / spec_.q_hat(n));
    x_scaled_ = spec_.x_gg * c_scale_.cwiseInverse().asDiagonal();
}

void Projector::cold_start(const Vec& x) {
    const int g = spec_.inverter_count();
    const int bg = spec_.branches * g;
    trap_ud_ = trap_us_ = Vec::Zero(bg);
    half_ud_ = half_us_ = half_uc_ = Vec::Zero(bg);
    cb_uc_ = Vec::Zero(bg);
    row_ua_ = Mat::Zero(g, g);
    hyp_ua_ = hyp_uc_ = Vec::Zero(bg);
    trap_d_ = trap_s_ = half_d_ = half_s_ = half_c_ = cb_c_ = hyp_a_ = hyp_c_ = Vec::Zero(bg);
    rho_ = 1.0;

    // Feasible start: the polished query, with a = max_b 1/c^b; c and a enter
    // the consensus vector in preconditioned units.
    const Vec z0 = polish_feasible(spec_, x);
    w_ = Vec::Zero(3 * bg + g);
    for (int n = 0; n < g; ++n) {
        const double s_n = c_scale_(n);
        double a = 0.0;
        for (int b = 0; b < spec_.branches; ++b) {
            const double de = z0((1 + 3 * b) * g + n);
            const double si = z0((2 + 3 * b) * g + n);
            const double c = z0((3 + 3 * b) * g + n) / s_n;
            w_((3 * b) * g + n) = de;
            w_((3 * b + 1) * g + n) = si;
            w_((3 * b + 2) * g + n) = c;
            a = std::max(a, 1.0 / c);
            trap_d_(b * g + n) = de;
            trap_s_(b * g + n) = si;
            half_d_(b * g + n) = de;
            half_s_(b * g + n) = si;
            half_c_(b * g + n) = c;
            cb_c_(b * g + n) = c;
            hyp_c_(b * g + n) = c;
        }
        w_(3 * bg + n) = a;
        for (int b = 0; b < spec_.branches; ++b) hyp_a_(b * g + n) = a;
    }
    row_a_ = w_.segment(3 * bg, g).transpose().replicate(g, 1);
}

void Projector::scale_duals(double factor) {
    trap_ud_ *= factor;
    trap_us_ *= factor;
    half_ud_ *= factor;
    half_us_ *= factor;
    half_uc_ *= factor;
    cb_uc_ *= factor;
    row_ua_ *= factor;
    hyp_ua_ *= factor;
    hyp_uc_ *= factor;
}

Vec Projector::project(const Vec& x) {
    const int g = spec_.inverter_count();
    const int nb = spec_.branches;
    const int bg = nb * g;
    if (x.size() != spec_.dim())
        fail(ErrorCode::DimensionMismatch, "x does not match the parameter layout");

    const double bound = 1.0 - spec_.eps;
    const Vec row_sq = x_scaled_.rowwise().squaredNorm();

    // Over-relaxation factor (valid range (0, 2)); 1.7 roughly halves the
    // iteration count on this splitting.
    constexpr double kRelax = 1.7;
    // Penalty adaptation must stop eventually: each rescale perturbs the
    // duals, and if it keeps firing the iteration orbits the solution at a
    // residual floor instead of converging. Budgeting the number of rescales
    // restores the fixed-penalty convergence guarantee while still letting
    // rho travel arbitrarily far when the residual imbalance persists.
    int adapt_budget = 64;

    if (!warm_) cold_start(x);

    stats_ = ProjectionStats{};
    bool converged = false;
    for (int it = 0; it < max_iters; ++it) {
        // Block projections x_i = P_i(w_i - u_i), over-relaxed toward the
        // previous consensus point.
        for (int b = 0; b < nb; ++b) {
            const int od = (3 * b) * g, os = (3 * b + 1) * g, oc = (3 * b + 2) * g;
            for (int n = 0; n < g; ++n) {
                const int k = b * g + n;
                project_trapezoid(w_(od + n) - trap_ud_(k), w_(os + n) - trap_us_(k), trap_d_(k),
                                  trap_s_(k));
                trap_d_(k) = kRelax * trap_d_(k) + (1.0 - kRelax) * w_(od + n);
                trap_s_(k) = kRelax * trap_s_(k) + (1.0 - kRelax) * w_(os + n);

                double d = w_(od + n) - half_ud_(k);
                double s = w_(os + n) - half_us_(k);
                double c = w_(oc + n) - half_uc_(k);
                const double qh = spec_.q_hat(n) * c_scale_(n);
                const double t = s - d - qh * c;
                if (t > 0.0) {
                    const double f = t / (2.0 + qh * qh);
                    d += f;
                    s -= f;
                    c += f * qh;
                }
                half_d_(k) = kRelax * d + (1.0 - kRelax) * w_(od + n);
                half_s_(k) = kRelax * s + (1.0 - kRelax) * w_(os + n);
                half_c_(k) = kRelax * c + (1.0 - kRelax) * w_(oc + n);

                cb_c_(k) = std::max(w_(oc + n) - cb_uc_(k), spec_.c_lower(n) / c_scale_(n));
                cb_c_(k) = kRelax * cb_c_(k) + (1.0 - kRelax) * w_(oc + n);

                project_hyperbola(w_(3 * bg + n) - hyp_ua_(k), w_(oc + n) - hyp_uc_(k), hyp_a_(k),
                                  hyp_c_(k));
                hyp_a_(k) = kRelax * hyp_a_(k) + (1.0 - kRelax) * w_(3 * bg + n);
                hyp_c_(k) = kRelax * hyp_c_(k) + (1.0 - kRelax) * w_(oc + n);
            }
        }
        for (int m = 0; m < g; ++m) {
            Vec y = w_.segment(3 * bg, g) - row_ua_.row(m).transpose();
            const double t = x_scaled_.row(m).dot(y) - bound;
            if (t > 0.0) y -= (t / row_sq(m)) * x_scaled_.row(m).transpose();
            row_a_.row(m) =
                (kRelax * y + (1.0 - kRelax) * w_.segment(3 * bg, g)).transpose();
        }

        // Consensus update: objective coordinates average against the query,
        // auxiliary coordinates plain-average across their blocks.
        const Vec w_old = w_;
        for (int b = 0; b < nb; ++b) {
            const int od = (3 * b) * g, os = (3 * b + 1) * g, oc = (3 * b + 2) * g;
            for (int n = 0; n < g; ++n) {
                const int k = b * g + n;
                w_(od + n) = (2.0 * x((1 + 3 * b) * g + n) +
                              rho_ * (trap_d_(k) + trap_ud_(k) + half_d_(k) + half_ud_(k))) /
                             (2.0 + 2.0 * rho_);
                w_(os + n) = (2.0 * x((2 + 3 * b) * g + n) +
                              rho_ * (trap_s_(k) + trap_us_(k) + half_s_(k) + half_us_(k))) /
                             (2.0 + 2.0 * rho_);
                // In scaled units the proximity term for c carries weight
                // c_scale^2: ||c - c0||^2 = s^2 ||c/s - c0/s||^2.
                const double s2 = c_scale_(n) * c_scale_(n);
                w_(oc + n) = (2.0 * c_scale_(n) * x((3 + 3 * b) * g + n) +
                              rho_ * (half_c_(k) + half_uc_(k) + cb_c_(k) + cb_uc_(k) +
                                      hyp_c_(k) + hyp_uc_(k))) /
                             (2.0 * s2 + 3.0 * rho_);
            }
        }
        for (int n = 0; n < g; ++n) {
            double acc = 0.0;
            for (int b = 0; b < nb; ++b) acc += hyp_a_(b * g + n) + hyp_ua_(b * g + n);
            for (int m = 0; m < g; ++m) acc += row_a_(m, n) + row_ua_(m, n);
            w_(3 * bg + n) = acc / static_cast<double>(g + nb);
        }

        // Dual ascent and residuals.
        double prim = 0.0;
        auto bump = [&prim](double& u, double local, double global) {
            const double r = local - global;
            u += r;
            prim = std::max(prim, std::abs(r));
        };
        for (int b = 0; b < nb; ++b) {
            const int od = (3 * b) * g, os = (3 * b + 1) * g, oc = (3 * b + 2) * g;
            for (int n = 0; n < g; ++n) {
                const int k = b * g + n;
                bump(trap_ud_(k), trap_d_(k), w_(od + n));
                bump(trap_us_(k), trap_s_(k), w_(os + n));
                bump(half_ud_(k), half_d_(k), w_(od + n));
                bump(half_us_(k), half_s_(k), w_(os + n));
                bump(half_uc_(k), half_c_(k), w_(oc + n));
                bump(cb_uc_(k), cb_c_(k), w_(oc + n));
                bump(hyp_ua_(k), hyp_a_(k), w_(3 * bg + n));
                bump(hyp_uc_(k), hyp_c_(k), w_(oc + n));
            }
        }
        for (int n = 0; n < g; ++n)
            for (int m = 0; m < g; ++m) bump(row_ua_(m, n), row_a_(m, n), w_(3 * bg + n));

        double dual = 0.0;
        for (int b = 0; b < nb; ++b) {
            const int od = (3 * b) * g, os = (3 * b + 1) * g, oc = (3 * b + 2) * g;
            for (int n = 0; n < g; ++n) {
                dual = std::max(dual, 2.0 * std::abs(w_(od + n) - w_old(od + n)));
                dual = std::max(dual, 2.0 * std::abs(w_(os + n) - w_old(os + n)));
                dual = std::max(dual, 3.0 * std::abs(w_(oc + n) - w_old(oc + n)));
            }
        }
        for (int n = 0; n < g; ++n)
            dual = std::max(dual, (g + nb) * std::abs(w_(3 * bg + n) - w_old(3 * bg + n)));
        dual *= rho_;

        stats_.iterations = it + 1;
        stats_.primal_residual = prim;
        stats_.dual_residual = dual;
        const double scale = std::max(1.0, w_.lpNorm<Eigen::Infinity>());
        if (prim <= tol * scale && dual <= tol * scale) {
            converged = true;
            break;
        }

        // Residual balancing keeps the two rates comparable; every firing
        // consumes budget so the penalty eventually freezes (see above).
        if (adapt_budget > 0 && (it + 1) % 64 == 0) {
            if (prim > 10.0 * dual && rho_ < 1e6) {
                rho_ *= 2.0;
                scale_duals(0.5);
                --adapt_budget;
            } else if (dual > 10.0 * prim && rho_ > 1e-6) {
                rho_ /= 2.0;
                scale_duals(2.0);
                --adapt_budget;
            }
        }
    }
    if (!converged)
        fail(ErrorCode::SolverStalled, "projection splitting did not reach its residual target");
    warm_ = true;

    Vec z(spec_.dim());
    for (int n = 0; n < g; ++n) {
        z(n) = std::clamp(x(n), kVbarLo, kVbarHi);
        for (int b = 0; b < nb; ++b) {
            z((1 + 3 * b) * g + n) = w_((3 * b) * g + n);
            z((2 + 3 * b) * g + n) = w_((3 * b + 1) * g + n);
            z((3 + 3 * b) * g + n) = c_scale_(n) * w_((3 * b + 2) * g + n);
        }
    }
    return polish_feasible(spec_, z);
}

} // namespace vvo
