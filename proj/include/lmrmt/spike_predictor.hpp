#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lmrmt {

/// Spectra of C_N (c, length N) and Gamma_n (t, length n, descending).
class PopulationModel {
 public:
  PopulationModel(Eigen::VectorXd c, Eigen::VectorXd t);

  const Eigen::VectorXd& c() const noexcept { return c_; }
  const Eigen::VectorXd& t() const noexcept { return t_; }
  std::size_t N() const noexcept { return static_cast<std::size_t>(c_.size()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(t_.size()); }
  double max_c() const noexcept { return c_.maxCoeff(); }

  /// m_k = tr C^k / N.
  double moment(int k) const;
  /// m_1 .. m_count.
  std::vector<double> moments(int count) const;

 private:
  Eigen::VectorXd c_;
  Eigen::VectorXd t_;
};

/// G(x, z) = N^-1 sum_i c_i / (x - z c_i). Throws BracketError on a pole.
double g_func(double x, double z, std::span<const double> c);
std::complex<double> g_func(std::complex<double> x, std::complex<double> z, std::span<const double> c);

/// z_j = N^-1 sum_{k != j} t_k / (t_j - t_k), j one-based. Throws
/// DegenerateGapError when some |t_j - t_k| < 1e-12 t_1.
double shift(std::size_t j, std::span<const double> t, std::size_t N);

/// Largest root of G(theta, z) = 1, i.e. right of the largest pole.
double solve_theta_at(double z, std::span<const double> c);

struct ThetaSolution {
  double z = 0.0;
  double theta = 0.0;
  double G_residual = 0.0;  ///< |G(theta, z) - 1|
};

ThetaSolution solve_theta(std::size_t j, const PopulationModel& model);

/// B_0 .. B_K of theta(z) = sum_k B_k z^k from m_1 .. m_{K+1}.
std::vector<double> series_coeffs(std::span<const double> moments, std::size_t K);

/// Horner evaluation of B_0 + B_1 z + ... + B_K z^K.
double theta_series(double z, std::span<const double> coeffs);

/// |z| <= 0.1 m_1 / max c: the region where series and root are compared.
bool within_series_region(double z, const PopulationModel& model);

struct SpikePrediction {
  std::size_t j = 0;  ///< one-based
  double z = 0.0;
  double theta_root = 0.0;
  double theta_series = 0.0;
  std::vector<double> coeffs;
  double G_residual = 0.0;
  /// |g_C(theta_j) - 1| from the deterministic-equivalent system; NaN when skipped.
  double det_equiv_residual = 0.0;
  bool in_series_region = false;

  nlohmann::json to_json() const;
};

SpikePrediction predict_spike(std::size_t j, const PopulationModel& model, std::size_t order = 10,
                              bool with_det_equiv = true);

}  // namespace lmrmt
