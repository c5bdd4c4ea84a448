#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace lmrmt {

/// Coupled system for (g_Gamma, g_C) at spectral parameter z:
///   g_Gamma = N^-1 sum_k t_k / (z (1 - g_C t_k))
///   g_C     = N^-1 sum_i c_i / (z (1 - g_Gamma c_i))
/// with t the reduced spectrum (see reduced_spectrum) and N = c.size().
struct DetEquivOptions {
  double tol = 1e-12;
  std::size_t max_iterations = 10000;
  double damping = 0.5;
  double eta_far = 1e-6;   ///< real-axis extrapolation nodes
  double eta_near = 1e-7;
};

struct DetEquivSolution {
  std::complex<double> g_gamma;
  std::complex<double> g_c;
  std::size_t iterations = 0;
  bool used_newton = false;
};

/// t_k / t_j for k != j (j one-based): the spectrum of Gamma_(j) normalised by t_j.
Eigen::VectorXd reduced_spectrum(std::size_t j, const Eigen::VectorXd& t);

/// Damped fixed point from g_C = m_1 / z, g_Gamma = 0 (or from `start`), with a
/// Newton fallback on the scalar equation for g_C. Throws ConvergenceError.
DetEquivSolution solve_det_equiv(std::complex<double> z, const Eigen::VectorXd& c, const Eigen::VectorXd& t,
                                 const DetEquivOptions& options = {}, const DetEquivSolution* start = nullptr);

/// Limit z -> x from the upper half plane: continuation in Im z down to the two
/// extrapolation nodes, then linear extrapolation to Im z = 0.
DetEquivSolution solve_det_equiv_real(double x, const Eigen::VectorXd& c, const Eigen::VectorXd& t,
                                      const DetEquivOptions& options = {});

/// 1 - x^2 gamma(x, g_C) gamma~(x, g_Gamma), which equals -dF/dg at g_C.
double support_margin(double x, const DetEquivSolution& sol, const Eigen::VectorXd& c, const Eigen::VectorXd& t);

/// x != 0 lies outside the support when the real-axis limit is real and the
/// margin is positive.
bool outside_support(double x, const Eigen::VectorXd& c, const Eigen::VectorXd& t,
                     const DetEquivOptions& options = {});

}  // namespace lmrmt
