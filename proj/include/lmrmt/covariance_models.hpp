#pragma once

#include <cstddef>
#include <mutex>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lmrmt/slowly_varying.hpp"

namespace lmrmt {

/// How the autocovariance sequence is generated.
enum class Route {
  decay,    ///< gamma(h) = L(h) / (1 + h)^rho
  density,  ///< gamma(k) = Fourier coefficient of L(1/|x|) / |x|^(1 - rho)
};

/// Scaling between a spectral density and its Fourier coefficients.
enum class FourierNormalization {
  inverse_two_pi,  ///< gamma(k) = (2 pi)^-1 * integral over [-pi, pi]
  unit,            ///< gamma(k) = integral over [-pi, pi]
};

/// Composite Gauss-Legendre (20 nodes per panel) settings for the density route.
///
/// [0, split] is integrated after substituting x = u^(1/rho), which turns the
/// x^(rho - 1) singularity into a constant factor 1/rho. Panels on both pieces
/// are graded geometrically toward the left end and never span more than
/// 1 / panels_per_period oscillation periods of cos(kx).
struct DensityQuadrature {
  double split = 1e-2;
  double panels_per_period = 1.0;
  double tolerance = 1e-8;  ///< relative agreement required with the doubled resolution
  FourierNormalization normalization = FourierNormalization::inverse_two_pi;
};

class ToeplitzSpec {
 public:
  ToeplitzSpec(double rho, SlowlyVarying L, Route route, DensityQuadrature quadrature = {});

  double rho() const noexcept { return rho_; }
  const SlowlyVarying& L() const noexcept { return L_; }
  Route route() const noexcept { return route_; }
  const DensityQuadrature& quadrature() const noexcept { return quadrature_; }

  nlohmann::json to_json() const;
  static ToeplitzSpec from_json(const nlohmann::json& j);

 private:
  double rho_;
  SlowlyVarying L_;
  Route route_;
  DensityQuadrature quadrature_;
};

std::string to_string(Route route);
std::string to_string(FourierNormalization normalization);

/// Symmetric Toeplitz matrix stored by its first column gamma(0..n-1).
struct ToeplitzMatrix {
  std::vector<double> first_column;
  ToeplitzSpec spec;

  std::size_t n() const noexcept { return first_column.size(); }
  double operator()(std::size_t i, std::size_t j) const { return first_column[i > j ? i - j : j - i]; }
  Eigen::MatrixXd dense() const;
  double trace() const;
  /// tr T^2 = ||T||_F^2 from the first column.
  double trace_of_square() const;
};

double autocov_decay(const ToeplitzSpec& spec, std::size_t h);

/// Density-route gamma(k) by the cosine formulation. Throws QuadratureError when
/// the doubled-resolution evaluation disagrees beyond the configured quadrature tolerance.
double autocov_density(const ToeplitzSpec& spec, std::size_t k);

/// Same coefficient from the full complex exponential over [-pi, pi]; the
/// imaginary part is discarded after checking it vanishes.
double autocov_density_exponential(const ToeplitzSpec& spec, std::size_t k);

/// Dispatches on the route.
double autocov(const ToeplitzSpec& spec, std::size_t k);

/// Limit of gamma(k) k^rho for the density route with L == 1:
/// 2 Gamma(rho) cos(rho pi / 2), divided by 2 pi under `inverse_two_pi`.
double density_asymptotic_constant(double rho, FourierNormalization normalization);

/// Lazily extended, thread-safe cache of gamma(0), gamma(1), ... for one spec.
class AutocovarianceSequence {
 public:
  explicit AutocovarianceSequence(ToeplitzSpec spec) : spec_(std::move(spec)) {}

  const ToeplitzSpec& spec() const noexcept { return spec_; }
  /// gamma(0..n-1), computing missing coefficients on demand.
  std::vector<double> first(std::size_t n);
  double at(std::size_t k);

 private:
  ToeplitzSpec spec_;
  std::mutex mutex_;
  std::vector<double> values_;
};

ToeplitzMatrix build_toeplitz(const ToeplitzSpec& spec, std::size_t n);
ToeplitzMatrix build_toeplitz(AutocovarianceSequence& sequence, std::size_t n);

struct MomentDecayRow {
  std::size_t n = 0;
  double lambda1 = 0.0;
  double first_moment_stat = 0.0;   ///< sqrt(n) tr(T / lambda1) / n
  double second_moment_stat = 0.0;  ///< sqrt(n) tr((T / lambda1)^2) / n
};

std::vector<MomentDecayRow> moment_decay_table(const ToeplitzSpec& spec, std::span<const std::size_t> sizes);

/// Single-column CSV with header "gamma".
void write_first_column_csv(std::ostream& os, const ToeplitzMatrix& T);

}  // namespace lmrmt
