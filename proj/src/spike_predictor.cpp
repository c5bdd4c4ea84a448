#include "lmrmt/spike_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "lmrmt/det_equiv.hpp"
#include "lmrmt/errors.hpp"

namespace lmrmt {

namespace {

// Neumaier-compensated accumulator.
template <class T>
struct CompensatedSum {
  T sum{};
  T carry{};
  void add(T v) {
    const T s = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - s) + v;
    } else {
      carry += (v - s) + sum;
    }
    sum = s;
  }
  T value() const { return sum + carry; }
};

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

PopulationModel::PopulationModel(Eigen::VectorXd c, Eigen::VectorXd t) : c_(std::move(c)), t_(std::move(t)) {
  if (c_.size() == 0) throw InvalidArgument("C spectrum is empty");
  if (t_.size() == 0) throw InvalidArgument("Gamma spectrum is empty");
  if (!c_.allFinite() || !t_.allFinite()) throw InvalidArgument("spectra must be finite");
  if ((c_.array() < 0.0).any()) throw InvalidArgument("C spectrum must be nonnegative");
  if (!(c_.array() > 0.0).any()) throw InvalidArgument("C spectrum must not vanish identically");
  if ((t_.array() < 0.0).any()) throw InvalidArgument("Gamma spectrum must be nonnegative");
  for (Eigen::Index k = 1; k < t_.size(); ++k) {
    if (t_(k) > t_(k - 1)) throw InvalidArgument("Gamma spectrum must be sorted in descending order");
  }
}

double PopulationModel::moment(int k) const {
  if (k < 0) throw InvalidArgument("moment order must be nonnegative");
  CompensatedSum<double> acc;
  for (Eigen::Index i = 0; i < c_.size(); ++i) acc.add(std::pow(c_(i), k));
  return acc.value() / static_cast<double>(c_.size());
}

std::vector<double> PopulationModel::moments(int count) const {
  std::vector<double> m;
  m.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 1; k <= count; ++k) m.push_back(moment(k));
  return m;
}

double g_func(double x, double z, std::span<const double> c) {
  if (c.empty()) throw InvalidArgument("empty C spectrum");
  CompensatedSum<double> acc;
  for (double ci : c) {
    if (ci == 0.0) continue;
    const double d = x - z * ci;
    if (d == 0.0) throw BracketError("G evaluated at a pole");
    acc.add(ci / d);
  }
  return acc.value() / static_cast<double>(c.size());
}

std::complex<double> g_func(std::complex<double> x, std::complex<double> z, std::span<const double> c) {
  if (c.empty()) throw InvalidArgument("empty C spectrum");
  CompensatedSum<double> re;
  CompensatedSum<double> im;
  for (double ci : c) {
    if (ci == 0.0) continue;
    const std::complex<double> d = x - z * ci;
    if (d == 0.0) throw BracketError("G evaluated at a pole");
    const std::complex<double> v = ci / d;
    re.add(v.real());
    im.add(v.imag());
  }
  return std::complex<double>(re.value(), im.value()) / static_cast<double>(c.size());
}

double shift(std::size_t j, std::span<const double> t, std::size_t N) {
  if (j == 0 || j > t.size()) throw InvalidArgument("spike index out of range");
  if (N == 0) throw InvalidArgument("N must be positive");
  const double t1 = *std::max_element(t.begin(), t.end());
  const double tj = t[j - 1];
  const double floor = 1e-12 * t1;
  CompensatedSum<double> acc;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k == j - 1) continue;
    const double gap = tj - t[k];
    if (!(std::abs(gap) >= floor) || gap == 0.0) {
      std::ostringstream msg;
      msg << "population eigenvalue " << j << " is not separated from eigenvalue " << k + 1 << " (gap " << gap
          << ", required " << floor << ")";
      throw DegenerateGapError(msg.str());
    }
    acc.add(t[k] / gap);
  }
  return acc.value() / static_cast<double>(N);
}

double solve_theta_at(double z, std::span<const double> c) {
  double max_c = 0.0;
  double min_pos_c = std::numeric_limits<double>::infinity();
  double m1 = 0.0;
  for (double ci : c) {
    if (ci < 0.0) throw InvalidArgument("C spectrum must be nonnegative");
    max_c = std::max(max_c, ci);
    if (ci > 0.0) min_pos_c = std::min(min_pos_c, ci);
    m1 += ci;
  }
  if (max_c == 0.0) throw InvalidArgument("C spectrum must not vanish identically");
  m1 /= static_cast<double>(c.size());

  const double pole = z >= 0.0 ? z * max_c : z * min_pos_c;
  const double lo = pole + 1e-10 * std::max(1.0, std::abs(pole));
  const double hi = m1 + std::abs(z) * max_c + 1.0;
  auto f = [&](double x) { return g_func(x, z, c) - 1.0; };
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (!(f_lo > 0.0) || !(f_hi < 0.0)) {
    std::ostringstream msg;
    msg << "spike equation has no sign change on [" << lo << ", " << hi << "]: G-1 = " << f_lo << ", " << f_hi
        << " (z = " << z << ")";
    throw BracketError(msg.str());
  }
  std::uintmax_t max_iter = 500;
  const auto bracket = boost::math::tools::toms748_solve(
      f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 2),
      max_iter);
  // Pick the endpoint with the smaller residual.
  const double a = bracket.first;
  const double b = bracket.second;
  return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

ThetaSolution solve_theta(std::size_t j, const PopulationModel& model) {
  ThetaSolution s;
  s.z = shift(j, as_span(model.t()), model.N());
  s.theta = solve_theta_at(s.z, as_span(model.c()));
  s.G_residual = std::abs(g_func(s.theta, s.z, as_span(model.c())) - 1.0);
  return s;
}

std::vector<double> series_coeffs(std::span<const double> moments, std::size_t K) {
  if (moments.size() < K + 1) {
    throw InvalidArgument("series of order " + std::to_string(K) + " needs moments m_1 .. m_" + std::to_string(K + 1));
  }
  const double m1 = moments[0];
  if (!(m1 > 0.0)) throw InvalidArgument("first moment must be positive");
  auto m = [&](std::size_t k) { return moments[k - 1]; };

  std::vector<double> B(K + 1, 0.0);
  B[0] = m1;
  // P[len][total] = [z^total] (sum_k B_k z^k)^len.
  std::vector<std::vector<double>> P(K + 2, std::vector<double>(K + 1, 0.0));
  for (std::size_t n = 1; n <= K; ++n) {
    B[n] = 0.0;
    for (auto& row : P) std::fill(row.begin(), row.end(), 0.0);
    P[0][0] = 1.0;
    for (std::size_t len = 1; len <= n + 1; ++len) {
      for (std::size_t total = 0; total <= n; ++total) {
        double acc = 0.0;
        for (std::size_t k = 0; k <= total; ++k) acc += B[k] * P[len - 1][total - k];
        P[len][total] = acc;
      }
    }
    double rhs = m(n + 1);
    for (std::size_t j = 1; j <= n; ++j) rhs += m(n - j + 1) * P[j][j];
    const double lhs = P[n + 1][n];
    // B_n enters the left side with weight (n+1) B_0^n and the right side with
    // m_1 n B_0^(n-1); the difference is m_1^n.
    B[n] = (rhs - lhs) / std::pow(m1, static_cast<double>(n));
  }
  return B;
}

double theta_series(double z, std::span<const double> coeffs) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
  return acc;
}

bool within_series_region(double z, const PopulationModel& model) {
  return std::abs(z) <= 0.1 * model.moment(1) / model.max_c();
}

nlohmann::json SpikePrediction::to_json() const {
  nlohmann::json out;
  out["j"] = j;
  out["z_j"] = z;
  out["theta_root"] = theta_root;
  out["theta_series"] = theta_series;
  out["coeffs"] = coeffs;
  out["in_series_region"] = in_series_region;
  nlohmann::json residuals;
  residuals["G"] = G_residual;
  if (std::isnan(det_equiv_residual)) {
    residuals["det_equiv"] = nullptr;
  } else {
    residuals["det_equiv"] = det_equiv_residual;
  }
  out["residuals"] = residuals;
  return out;
}

SpikePrediction predict_spike(std::size_t j, const PopulationModel& model, std::size_t order, bool with_det_equiv) {
  SpikePrediction p;
  p.j = j;
  const ThetaSolution root = solve_theta(j, model);
  p.z = root.z;
  p.theta_root = root.theta;
  p.G_residual = root.G_residual;
  p.coeffs = series_coeffs(model.moments(static_cast<int>(order) + 1), order);
  p.theta_series = lmrmt::theta_series(p.z, p.coeffs);
  p.in_series_region = within_series_region(p.z, model);
  p.det_equiv_residual = std::numeric_limits<double>::quiet_NaN();
  if (with_det_equiv) {
    const Eigen::VectorXd reduced = reduced_spectrum(j, model.t());
    const DetEquivSolution sol = solve_det_equiv_real(p.theta_root, model.c(), reduced);
    p.det_equiv_residual = std::abs(sol.g_c - 1.0);
  }
  return p;
}

}  // namespace lmrmt
