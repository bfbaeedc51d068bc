#include "stability.hpp"

#include <Eigen/Eigenvalues>

#include "errors.hpp"

namespace vvo {

namespace {

constexpr double kBoundarySlack = 1e-12;   // non-strict comparisons at the boundary

void check_inputs(const Mat& x_gg, const Vec& alpha, double eps) {
    if (x_gg.rows() != x_gg.cols() || x_gg.rows() != alpha.size())
        fail(ErrorCode::DimensionMismatch, "alpha must match the inverter block of X");
    if (eps < 0.0 || eps >= 1.0)
        fail(ErrorCode::InvalidArgument, "stability margin eps must lie in [0, 1)");
    for (int i = 0; i < alpha.size(); ++i)
        if (alpha(i) < 0.0) fail(ErrorCode::InvalidArgument, "slopes must be non-negative");
}

} // namespace

double spectral_norm_scaled(const Mat& x_gg, const Vec& alpha) {
    const Mat m = alpha.asDiagonal() * x_gg;
    const Mat mtm = m.transpose() * m;
    if (x_gg.rows() <= 500) {
        Eigen::SelfAdjointEigenSolver<Mat> es(mtm, Eigen::EigenvaluesOnly);
        const double lam = es.eigenvalues().maxCoeff();
        return lam > 0.0 ? std::sqrt(lam) : 0.0;
    }
    // Power iteration on M^T M for large instances.
    Vec v = Vec::Ones(x_gg.rows());
    v.normalize();
    double lam = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Vec w = mtm * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double lam_new = w.dot(mtm * w);
        if (std::abs(lam_new - lam) <= 1e-10 * std::max(1.0, lam_new)) {
            lam = lam_new;
            break;
        }
        lam = lam_new;
        v = w;
    }
    return lam > 0.0 ? std::sqrt(lam) : 0.0;
}

StabilityReport spectral_check(const Mat& x_gg, const Vec& alpha, double eps) {
    check_inputs(x_gg, alpha, eps);
    StabilityReport rep;
    rep.eps = eps;
    rep.spectral_norm = spectral_norm_scaled(x_gg, alpha);
    rep.spectral_ok = rep.spectral_norm <= (1.0 - eps) + kBoundarySlack;
    return rep;
}

StabilityReport polytope_check(const Mat& x_gg, const Vec& alpha, double eps) {
    check_inputs(x_gg, alpha, eps);
    StabilityReport rep;
    rep.eps = eps;
    const double bound = 1.0 - eps;
    const Vec xa = x_gg * alpha;
    const Vec row_sums = x_gg * Vec::Ones(x_gg.rows());
    for (int n = 0; n < alpha.size(); ++n) {
        if (xa(n) > bound + kBoundarySlack) rep.violated_family1.push_back(n);
        if (alpha(n) * row_sums(n) > bound + kBoundarySlack) rep.violated_family2.push_back(n);
    }
    rep.polytope_ok = rep.violated_family1.empty() && rep.violated_family2.empty();
    return rep;
}

StabilityReport full_check(const Mat& x_gg, const Vec& alpha, double eps) {
    StabilityReport rep = polytope_check(x_gg, alpha, eps);
    const StabilityReport spec = spectral_check(x_gg, alpha, eps);
    rep.spectral_norm = spec.spectral_norm;
    rep.spectral_ok = spec.spectral_ok;
    return rep;
}

double max_uniform_slope(const Mat& x_gg, double eps) {
    if (x_gg.rows() != x_gg.cols())
        fail(ErrorCode::DimensionMismatch, "X_GG must be square");
    if (eps < 0.0 || eps > 1.0)
        fail(ErrorCode::InvalidArgument, "stability margin eps must lie in [0, 1]");
    const double denom = (x_gg * Vec::Ones(x_gg.rows())).lpNorm<Eigen::Infinity>();
    if (denom <= 0.0) fail(ErrorCode::InvalidArgument, "X_GG must have positive row sums");
    return (1.0 - eps) / denom;
}

} // namespace vvo
