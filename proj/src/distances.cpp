#include "lmrmt/distances.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lmrmt/errors.hpp"

namespace lmrmt {

namespace {

std::vector<double> sorted_copy(std::span<const double> samples, double sigma2) {
  if (samples.empty()) throw InvalidArgument("distance needs at least one sample");
  if (!(sigma2 > 0.0)) throw InvalidArgument("target variance must be positive");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double normal_cdf(double x, double sigma2) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * sigma2)); }

double ks_statistic(std::span<const double> samples, double sigma2) {
  const std::vector<double> s = sorted_copy(samples, sigma2);
  const double R = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double g = normal_cdf(s[i], sigma2);
    d = std::max({d, static_cast<double>(i + 1) / R - g, g - static_cast<double>(i) / R});
  }
  return std::clamp(d, 0.0, 1.0);
}

double levy_distance(std::span<const double> samples, double sigma2, double tol) {
  const std::vector<double> s = sorted_copy(samples, sigma2);
  const double R = static_cast<double>(s.size());
  auto feasible = [&](double eps) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (normal_cdf(s[i] + eps, sigma2) < static_cast<double>(i + 1) / R - eps) return false;
      if (normal_cdf(s[i] - eps, sigma2) > static_cast<double>(i) / R + eps) return false;
    }
    return true;
  };
  // The KS distance is always feasible.
  double lo = 0.0;
  double hi = ks_statistic(samples, sigma2);
  if (feasible(lo)) return 0.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace lmrmt
