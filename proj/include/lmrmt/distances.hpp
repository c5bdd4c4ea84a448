#pragma once

#include <span>

namespace lmrmt {

/// CDF of N(0, sigma2).
double normal_cdf(double x, double sigma2);

/// One-sample Kolmogorov-Smirnov distance to N(0, sigma2). Throws for
/// sigma2 <= 0 or empty samples.
double ks_statistic(std::span<const double> samples, double sigma2);

/// Levy distance between the empirical CDF and N(0, sigma2): the smallest eps
/// with F(x - eps) - eps <= G(x) <= F(x + eps) + eps for all x. Bisection on
/// eps; the conditions are checked exactly at the sample points, where the step
/// function attains its extremes. Never exceeds the KS distance.
double levy_distance(std::span<const double> samples, double sigma2, double tol = 1e-12);

}  // namespace lmrmt
