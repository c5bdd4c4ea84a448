#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lmrmt/covariance_models.hpp"
#include "lmrmt/slowly_varying.hpp"
#include "lmrmt/spectral_engine.hpp"

namespace lmrmt {

/// Galerkin discretisation of (K f)(x) = int_0^tau |x - y|^-rho f(y) dy on
/// grid_n equal cells with piecewise-constant trial functions.
struct KernelEigenSystem {
  double rho = 0.0;
  std::size_t grid_n = 0;
  double interval = 1.0;
  Eigen::VectorXd values;  ///< descending
  /// grid_n x m, f_j at cell midpoints; (interval / grid_n) * sum f^2 = 1.
  /// Signs are fixed so that f_j at the right endpoint is positive.
  Eigen::MatrixXd functions;
  Eigen::VectorXd boundary_values;       ///< |f_j(interval)| from the eigen-equation
  Eigen::VectorXd left_boundary_values;  ///< |f_j(0)|, same construction
  double residual_bound = 0.0;

  std::size_t count() const noexcept { return static_cast<std::size_t>(values.size()); }
  /// Nystrom extension f_j(x) = lambda_j^-1 int |x - y|^-rho f_j(y) dy with the
  /// piecewise-constant samples integrated exactly. j is zero-based.
  double evaluate(std::size_t j, double x) const;
  Eigen::VectorXd evaluate(std::size_t j, std::span<const double> xs) const;
  /// All functions at once: xs.size() x count().
  Eigen::MatrixXd evaluate_all(std::span<const double> xs) const;

  nlohmann::json to_json() const;
};

/// First column of the (Toeplitz) Galerkin matrix:
/// (1/h) int int over cells i, i+d of |x - y|^-rho, h = tau / grid_n.
/// rho = 0 gives the constant kernel.
std::vector<double> kernel_matrix_column(double rho, std::size_t grid_n, double tau = 1.0);

KernelEigenSystem kernel_eigs(double rho, std::size_t grid_n, std::size_t m, const EigenOptions& options = {});

/// Same operator on L^2(0, tau).
KernelEigenSystem kernel_eigs_on_interval(double rho, double tau, std::size_t grid_n, std::size_t m,
                                          const EigenOptions& options = {});

namespace testing {
/// Degenerate kernel == 1 (the rho -> 0 limit); rank one with lambda_1 = 1.
KernelEigenSystem constant_kernel_eigs(std::size_t grid_n, std::size_t m);
}  // namespace testing

/// | |f_j(1)| - sqrt(1 - rho) | per eigenfunction.
Eigen::VectorXd boundary_check(const KernelEigenSystem& system);

/// First-order Richardson extrapolation from grids n and 2n given the
/// observed convergence order p: fine + (fine - coarse) / (2^p - 1).
double richardson_extrapolate(double coarse, double fine, double order);

struct ToeplitzKernelRow {
  std::size_t n = 0;
  std::size_t j = 0;  ///< one-based
  double lambda = 0.0;
  /// lambda_j(T_n) / (n^(1-rho) L(n)), additionally divided by
  /// density_asymptotic_constant(rho) on the density route.
  double ratio = 0.0;
  double target = 0.0;  ///< lambda_j(K)
  double sup_dev = 0.0;  ///< sup_k |sqrt(n) u_{j,k} - f_j(k/n)| after sign alignment
  double deloc = 0.0;    ///< sqrt(n) ||u_j||_inf
  Eigen::VectorXd scaled_vector;  ///< sqrt(n) u_j, sign-aligned with f_j
  Eigen::VectorXd kernel_values;  ///< f_j(k/n), k = 1..n
};

/// Sizes must increase; each size is an independent task.
std::vector<ToeplitzKernelRow> toeplitz_vs_kernel_report(const ToeplitzSpec& spec, std::span<const std::size_t> sizes,
                                                         std::size_t j_max, const KernelEigenSystem& kernel,
                                                         std::size_t threads = 1);

struct ToeplitzPairRow {
  std::size_t n = 0;
  double norm_difference = 0.0;  ///< || T/(n^(1-rho) L(n)) - T'/n^(1-rho) ||_2
  std::vector<double> eigvec_distances;  ///< || u_j - u'_j || after sign alignment, j = 1..3
};

/// T from the density route with L, T' with L == 1; both share quadrature settings.
std::vector<ToeplitzPairRow> compare_toeplitz_pair(double rho, const SlowlyVarying& L, std::span<const std::size_t> sizes,
                                                   const DensityQuadrature& quadrature = {}, std::size_t threads = 1);

/// Columns n, j, ratio, target, sup_dev, deloc.
void write_report_csv(std::ostream& os, std::span<const ToeplitzKernelRow> rows);
/// Columns n, norm_difference, evec_dist_1..3.
void write_pair_csv(std::ostream& os, std::span<const ToeplitzPairRow> rows);
/// Columns x, f_1..f_m at the cell midpoints.
void write_functions_csv(std::ostream& os, const KernelEigenSystem& system);

}  // namespace lmrmt
