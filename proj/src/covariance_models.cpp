#include "lmrmt/covariance_models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "lmrmt/errors.hpp"
#include "lmrmt/report_io.hpp"
#include "lmrmt/spectral_engine.hpp"
#include "lmrmt/toeplitz_operator.hpp"

namespace lmrmt {

namespace {

constexpr double kPi = std::numbers::pi;

struct GaussRule {
  std::array<double, 20> nodes{};
  std::array<double, 20> weights{};
};

const GaussRule& gauss20() {
  static const GaussRule rule = [] {
    using G = boost::math::quadrature::gauss<double, 20>;
    GaussRule r;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < 10; ++i) {
      r.nodes[i] = -x[9 - i];
      r.weights[i] = w[9 - i];
      r.nodes[10 + i] = x[i];
      r.weights[10 + i] = w[i];
    }
    return r;
  }();
  return rule;
}

// Integrates f over [a, b] with one 20-node panel.
template <class F>
auto gauss_panel(F&& f, double a, double b) {
  const auto& rule = gauss20();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  decltype(f(a)) acc{};
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

// Panels on the singular piece, in the substituted variable u in [0, split^rho].
// Marches right to left: widths shrink geometrically toward u = 0 and are capped
// by the local oscillation period of cos(k u^(1/rho)).
std::vector<std::pair<double, double>> singular_panels(double rho, double split, double k, double per_period,
                                                       double refine) {
  std::vector<std::pair<double, double>> panels;
  const double top = std::pow(split, rho);
  const double floor = top * 1e-14;
  double b = top;
  while (b > floor) {
    double width = 0.5 * b;
    if (k > 0.0) {
      const double rate = (k / rho) * std::pow(b, 1.0 / rho - 1.0);
      width = std::min(width, 2.0 * kPi / (rate * per_period));
    }
    width /= refine;
    panels.emplace_back(b - width, b);
    b -= width;
  }
  panels.emplace_back(0.0, b);
  return panels;
}

// Panels on the regular piece [split, pi], graded away from the split point.
std::vector<std::pair<double, double>> regular_panels(double split, double k, double per_period, double refine) {
  std::vector<std::pair<double, double>> panels;
  double a = split;
  while (a < kPi) {
    double width = 0.5 * a;
    if (k > 0.0) width = std::min(width, 2.0 * kPi / (k * per_period));
    width /= refine;
    const double b = std::min(kPi, a + width);
    panels.emplace_back(a, b);
    a = b;
  }
  return panels;
}

double normalization_factor(FourierNormalization normalization) {
  // Both formulations integrate over [0, pi] and double for evenness.
  return normalization == FourierNormalization::inverse_two_pi ? 1.0 / kPi : 2.0;
}

// Integral over [0, pi] of L(1/x) x^(rho-1) cos(kx), at the given refinement.
double cosine_integral(const ToeplitzSpec& spec, std::size_t k, double refine) {
  const double rho = spec.rho();
  const auto& L = spec.L();
  const auto& q = spec.quadrature();
  const double kk = static_cast<double>(k);

  double total = 0.0;
  double compensation = 0.0;
  auto accumulate = [&](double v) {
    const double t = total + v;
    compensation += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
    total = t;
  };

  auto singular = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double x = std::pow(u, 1.0 / rho);
    return L(1.0 / x) * std::cos(kk * x) / rho;
  };
  for (auto [a, b] : singular_panels(rho, q.split, kk, q.panels_per_period, refine)) {
    accumulate(gauss_panel(singular, a, b));
  }
  auto regular = [&](double x) { return L(1.0 / x) * std::pow(x, rho - 1.0) * std::cos(kk * x); };
  for (auto [a, b] : regular_panels(q.split, kk, q.panels_per_period, refine)) {
    accumulate(gauss_panel(regular, a, b));
  }
  return total + compensation;
}

// Integral over [-pi, pi] of phi(x) exp(-ikx), with the negative half-line
// evaluated at mirrored nodes.
std::complex<double> exponential_integral(const ToeplitzSpec& spec, std::size_t k) {
  const double rho = spec.rho();
  const auto& L = spec.L();
  const auto& q = spec.quadrature();
  const double kk = static_cast<double>(k);
  const std::complex<double> I(0.0, 1.0);

  std::complex<double> total{};
  for (double side : {1.0, -1.0}) {
    auto singular = [&](double u) -> std::complex<double> {
      if (u <= 0.0) return {};
      const double x = side * std::pow(u, 1.0 / rho);
      return L(1.0 / std::abs(x)) * std::exp(-I * kk * x) / rho;
    };
    for (auto [a, b] : singular_panels(rho, q.split, kk, q.panels_per_period, 1.0)) {
      total += gauss_panel(singular, a, b);
    }
    auto regular = [&](double y) -> std::complex<double> {
      const double x = side * y;
      return L(1.0 / y) * std::pow(y, rho - 1.0) * std::exp(-I * kk * x);
    };
    for (auto [a, b] : regular_panels(q.split, kk, q.panels_per_period, 1.0)) total += gauss_panel(regular, a, b);
  }
  return total;
}

}  // namespace

ToeplitzSpec::ToeplitzSpec(double rho, SlowlyVarying L, Route route, DensityQuadrature quadrature)
    : rho_(rho), L_(std::move(L)), route_(route), quadrature_(quadrature) {
  if (!(rho > 0.0 && rho < 1.0)) {
    std::ostringstream msg;
    msg << "rho must lie strictly inside (0, 1), got " << rho;
    throw InvalidArgument(msg.str());
  }
  if (!(quadrature.split > 0.0 && quadrature.split < kPi)) throw InvalidArgument("quadrature split must lie in (0, pi)");
  if (!(quadrature.panels_per_period > 0.0)) throw InvalidArgument("quadrature panels_per_period must be positive");
  if (!(quadrature.tolerance > 0.0)) throw InvalidArgument("quadrature tolerance must be positive");
}

std::string to_string(Route route) { return route == Route::decay ? "decay" : "density"; }

std::string to_string(FourierNormalization normalization) {
  return normalization == FourierNormalization::inverse_two_pi ? "inverse_two_pi" : "unit";
}

nlohmann::json ToeplitzSpec::to_json() const {
  nlohmann::json j;
  j["rho"] = rho_;
  j["L"] = L_.to_json();
  j["route"] = to_string(route_);
  j["quadrature"] = {{"split", quadrature_.split},
                     {"panels_per_period", quadrature_.panels_per_period},
                     {"tolerance", quadrature_.tolerance},
                     {"normalization", to_string(quadrature_.normalization)}};
  return j;
}

ToeplitzSpec ToeplitzSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rho")) throw InvalidArgument("ToeplitzSpec JSON needs at least a 'rho' field");
  const double rho = j.at("rho").get<double>();
  const SlowlyVarying L = j.contains("L") ? SlowlyVarying::from_json(j.at("L")) : SlowlyVarying::constant(1.0);
  const std::string route_name = j.value("route", std::string("decay"));
  Route route;
  if (route_name == "decay") {
    route = Route::decay;
  } else if (route_name == "density") {
    route = Route::density;
  } else {
    throw InvalidArgument("unknown route '" + route_name + "' (expected decay or density)");
  }
  DensityQuadrature q;
  if (j.contains("quadrature")) {
    const auto& qj = j.at("quadrature");
    q.split = qj.value("split", q.split);
    q.panels_per_period = qj.value("panels_per_period", q.panels_per_period);
    q.tolerance = qj.value("tolerance", q.tolerance);
    const std::string norm = qj.value("normalization", std::string("inverse_two_pi"));
    if (norm == "inverse_two_pi") {
      q.normalization = FourierNormalization::inverse_two_pi;
    } else if (norm == "unit") {
      q.normalization = FourierNormalization::unit;
    } else {
      throw InvalidArgument("unknown normalization '" + norm + "' (expected inverse_two_pi or unit)");
    }
  }
  return ToeplitzSpec(rho, L, route, q);
}

Eigen::MatrixXd ToeplitzMatrix::dense() const {
  const auto size = static_cast<Eigen::Index>(n());
  Eigen::MatrixXd A(size, size);
  for (Eigen::Index j = 0; j < size; ++j) {
    for (Eigen::Index i = 0; i < size; ++i) A(i, j) = first_column[static_cast<std::size_t>(std::abs(i - j))];
  }
  return A;
}

double ToeplitzMatrix::trace() const { return first_column.empty() ? 0.0 : static_cast<double>(n()) * first_column[0]; }

double ToeplitzMatrix::trace_of_square() const {
  const std::size_t size = n();
  if (size == 0) return 0.0;
  double acc = static_cast<double>(size) * first_column[0] * first_column[0];
  for (std::size_t k = 1; k < size; ++k) acc += 2.0 * static_cast<double>(size - k) * first_column[k] * first_column[k];
  return acc;
}

double autocov_decay(const ToeplitzSpec& spec, std::size_t h) {
  const double hh = static_cast<double>(h);
  return spec.L()(hh) / std::pow(1.0 + hh, spec.rho());
}

double autocov_density(const ToeplitzSpec& spec, std::size_t k) {
  const double coarse = cosine_integral(spec, k, 1.0);
  const double fine = cosine_integral(spec, k, 2.0);
  const double scale = std::max(std::abs(fine), 1e-12);
  if (std::abs(coarse - fine) > spec.quadrature().tolerance * scale) {
    std::ostringstream msg;
    msg << "density quadrature for gamma(" << k << ") did not converge: " << coarse << " vs " << fine
        << " at doubled resolution";
    throw QuadratureError(msg.str());
  }
  return normalization_factor(spec.quadrature().normalization) * fine;
}

double autocov_density_exponential(const ToeplitzSpec& spec, std::size_t k) {
  const std::complex<double> value = exponential_integral(spec, k);
  if (std::abs(value.imag()) > 1e-10 * std::max(1.0, std::abs(value.real()))) {
    throw QuadratureError("complex-exponential density quadrature left a non-negligible imaginary part");
  }
  // exponential_integral covers [-pi, pi]; cosine_integral covers [0, pi].
  return 0.5 * normalization_factor(spec.quadrature().normalization) * value.real();
}

double autocov(const ToeplitzSpec& spec, std::size_t k) {
  return spec.route() == Route::decay ? autocov_decay(spec, k) : autocov_density(spec, k);
}

double density_asymptotic_constant(double rho, FourierNormalization normalization) {
  const double unit = 2.0 * boost::math::tgamma(rho) * std::cos(rho * kPi / 2.0);
  return normalization == FourierNormalization::unit ? unit : unit / (2.0 * kPi);
}

std::vector<double> AutocovarianceSequence::first(std::size_t n) {
  std::lock_guard lock(mutex_);
  for (std::size_t k = values_.size(); k < n; ++k) values_.push_back(autocov(spec_, k));
  return {values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n)};
}

double AutocovarianceSequence::at(std::size_t k) { return first(k + 1).back(); }

ToeplitzMatrix build_toeplitz(const ToeplitzSpec& spec, std::size_t n) {
  AutocovarianceSequence sequence(spec);
  return build_toeplitz(sequence, n);
}

ToeplitzMatrix build_toeplitz(AutocovarianceSequence& sequence, std::size_t n) {
  if (n == 0) throw InvalidArgument("Toeplitz dimension must be at least 1");
  return ToeplitzMatrix{sequence.first(n), sequence.spec()};
}

std::vector<MomentDecayRow> moment_decay_table(const ToeplitzSpec& spec, std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw InvalidArgument("moment_decay_table needs at least one size");
  if (!std::is_sorted(sizes.begin(), sizes.end()) ||
      std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end()) {
    throw InvalidArgument("moment_decay_table sizes must be strictly increasing");
  }
  AutocovarianceSequence sequence(spec);
  std::vector<MomentDecayRow> rows;
  for (std::size_t n : sizes) {
    const ToeplitzMatrix T = build_toeplitz(sequence, n);
    const ToeplitzOperator op(T.first_column);
    const double lambda1 = hermitian_top_eigenpairs(op, 1).values(0);
    const double nn = static_cast<double>(n);
    MomentDecayRow row;
    row.n = n;
    row.lambda1 = lambda1;
    row.first_moment_stat = std::sqrt(nn) * (T.trace() / lambda1) / nn;
    row.second_moment_stat = std::sqrt(nn) * (T.trace_of_square() / (lambda1 * lambda1)) / nn;
    rows.push_back(row);
  }
  return rows;
}

void write_first_column_csv(std::ostream& os, const ToeplitzMatrix& T) {
  CsvWriter csv(os);
  csv.row({"gamma"});
  for (double g : T.first_column) csv.values(g);
}

}  // namespace lmrmt
