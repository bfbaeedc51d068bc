#pragma once

#include <vector>

#include "feeder.hpp"

namespace vvo {

/// Verdict of the closed-loop stability tests for slope vector alpha.
/// `spectral_*` refers to the exact condition sigma_max(diag(alpha) X_GG)
/// <= 1 - eps; `polytope_*` to the linear inner approximation
///   family 1:  X_GG alpha <= (1-eps) 1
///   family 2:  alpha_n (X_GG 1)_n <= 1-eps   for every n.
struct StabilityReport {
    double spectral_norm = 0.0;
    double eps = 0.0;
    bool spectral_ok = false;
    bool polytope_ok = false;
    std::vector<int> violated_family1;   // rows of X alpha <= (1-eps) 1
    std::vector<int> violated_family2;   // rows of diag(X 1) alpha <= (1-eps) 1
};

/// Exact test: largest singular value of diag(alpha) X_GG against 1-eps.
StabilityReport spectral_check(const Mat& x_gg, const Vec& alpha, double eps);

/// Linear sufficient conditions of the stability polytope; reports which
/// rows of each family fail.
StabilityReport polytope_check(const Mat& x_gg, const Vec& alpha, double eps);

/// Both checks merged into one report.
StabilityReport full_check(const Mat& x_gg, const Vec& alpha, double eps);

/// Conservative uniform slope bound (1-eps) / ||X 1||_inf from prior art,
/// kept for comparison studies.
double max_uniform_slope(const Mat& x_gg, double eps);

/// sigma_max(diag(alpha) X): dense eigen-decomposition of the symmetrized
/// product up to 500x500, power iteration above.
double spectral_norm_scaled(const Mat& x_gg, const Vec& alpha);

} // namespace vvo
