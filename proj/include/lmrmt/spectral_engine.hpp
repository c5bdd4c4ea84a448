#pragma once

#include <complex>
#include <cstddef>
#include <functional>

#include <Eigen/Dense>

#include "lmrmt/toeplitz_operator.hpp"

namespace lmrmt {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Leading eigenpairs of a Hermitian operator, largest first.
template <class Scalar>
struct EigenPairs {
  Eigen::VectorXd values;
  MatrixX<Scalar> vectors;
  /// max_j ||A v_j - lambda_j v_j|| / ||A||, with ||A|| estimated by the
  /// largest |eigenvalue| seen.
  double residual_bound = 0.0;
  std::size_t matvecs = 0;
};

enum class EigenMethod { automatic, dense, lanczos };

struct EigenOptions {
  double tol = 1e-9;
  EigenMethod method = EigenMethod::automatic;
  /// automatic picks the dense path up to this dimension.
  std::size_t dense_crossover = 1024;
  /// Krylov basis size per restart cycle; 0 picks max(2m + 20, 40).
  std::size_t krylov_dim = 0;
  std::size_t max_restarts = 500;
  /// Relative (to max |a_ij|) tolerance of the Hermitian check.
  double hermitian_tol = 1e-12;
};

template <class Scalar>
using LinearOperator = std::function<void(const VectorX<Scalar>&, VectorX<Scalar>&)>;

/// Throws NonHermitianError unless max |A - A*| <= tol * max |A|.
template <class Scalar>
void require_hermitian(const MatrixX<Scalar>& A, double tol);

/// Dense path: full decomposition, then truncation to the top m.
template <class Scalar>
EigenPairs<Scalar> dense_top_eigenpairs(const MatrixX<Scalar>& A, std::size_t m);

/// Thick-restart Lanczos with full reorthogonalisation against the whole basis.
/// Throws ConvergenceError (with the achieved relative residual) when the
/// restart budget runs out.
template <class Scalar>
EigenPairs<Scalar> lanczos_top_eigenpairs(const LinearOperator<Scalar>& op, std::size_t n, std::size_t m,
                                          const EigenOptions& options = {});

template <class Scalar>
EigenPairs<Scalar> hermitian_top_eigenpairs(const MatrixX<Scalar>& A, std::size_t m, const EigenOptions& options = {});

/// Toeplitz handle: dense below the crossover, FFT matvec + Lanczos above.
EigenPairs<double> hermitian_top_eigenpairs(const ToeplitzOperator& T, std::size_t m, const EigenOptions& options = {});

/// Top m eigenvalues only (dense), largest first. No Hermitian check; used on
/// matrices that are Hermitian by construction.
template <class Scalar>
Eigen::VectorXd top_eigenvalues(const MatrixX<Scalar>& A, std::size_t m);

/// Returns u rotated by a unimodular factor so that <reference, u> is real and
/// nonnegative (a sign flip in the real case). Orthogonal input is returned
/// unchanged.
Eigen::VectorXd align_sign(const Eigen::VectorXd& u, const Eigen::VectorXd& reference);
Eigen::VectorXcd align_sign(const Eigen::VectorXcd& u, const Eigen::VectorXcd& reference);

}  // namespace lmrmt
