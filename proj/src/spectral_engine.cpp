#include "lmrmt/spectral_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "lmrmt/errors.hpp"

namespace lmrmt {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit_double(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

template <class Scalar>
VectorX<Scalar> pseudo_random_vector(Eigen::Index n, std::uint64_t seed) {
  VectorX<Scalar> v(n);
  std::uint64_t state = seed;
  for (Eigen::Index i = 0; i < n; ++i) {
    if constexpr (std::is_same_v<Scalar, double>) {
      v(i) = unit_double(state);
    } else {
      const double re = unit_double(state);
      const double im = unit_double(state);
      v(i) = Scalar(re, im);
    }
  }
  return v;
}

template <class Scalar>
double max_abs(const MatrixX<Scalar>& A) {
  return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

// Projects v off span(V) twice; returns false if nothing survives.
template <class Scalar>
bool orthogonalize(const Eigen::Ref<const MatrixX<Scalar>>& V, VectorX<Scalar>& v) {
  const double before = v.norm();
  for (int pass = 0; pass < 2; ++pass) {
    if (V.cols() > 0) v -= V * (V.adjoint() * v);
  }
  const double after = v.norm();
  if (!(after > 1e-10 * before) || after == 0.0) return false;
  v /= after;
  return true;
}

}  // namespace

template <class Scalar>
void require_hermitian(const MatrixX<Scalar>& A, double tol) {
  if (A.rows() != A.cols()) throw NonHermitianError("matrix is not square");
  const double scale = max_abs(A);
  const double defect = (A - A.adjoint()).cwiseAbs().maxCoeff();
  if (defect > tol * std::max(scale, 1e-300)) {
    std::ostringstream msg;
    msg << "matrix is not Hermitian: max |A - A*| = " << defect << " (max |A| = " << scale << ")";
    throw NonHermitianError(msg.str());
  }
}

template <class Scalar>
EigenPairs<Scalar> dense_top_eigenpairs(const MatrixX<Scalar>& A, std::size_t m) {
  const Eigen::Index n = A.rows();
  if (m == 0 || static_cast<Eigen::Index>(m) > n) throw InvalidArgument("requested eigenpair count out of range");
  // Symmetrise exactly so that tiny asymmetries accepted by the check do not
  // depend on which triangle the solver reads.
  const MatrixX<Scalar> H = (A + A.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(H);
  if (solver.info() != Eigen::Success) throw NumericalError("dense Hermitian eigensolver failed");
  const auto mm = static_cast<Eigen::Index>(m);
  EigenPairs<Scalar> out;
  out.values = solver.eigenvalues().reverse().head(mm);
  out.vectors = solver.eigenvectors().rowwise().reverse().leftCols(mm);
  const double norm = std::max(std::abs(solver.eigenvalues()(0)), std::abs(solver.eigenvalues()(n - 1)));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < mm; ++j) {
    const double r = (H * out.vectors.col(j) - out.values(j) * out.vectors.col(j)).norm();
    worst = std::max(worst, r);
  }
  out.residual_bound = norm > 0.0 ? worst / norm : worst;
  return out;
}

template <class Scalar>
EigenPairs<Scalar> lanczos_top_eigenpairs(const LinearOperator<Scalar>& op, std::size_t n_in, std::size_t m_in,
                                          const EigenOptions& options) {
  using Index = Eigen::Index;
  const auto n = static_cast<Index>(n_in);
  const auto m = static_cast<Index>(m_in);
  if (m == 0 || m > n) throw InvalidArgument("requested eigenpair count out of range");

  Index kmax = options.krylov_dim > 0 ? static_cast<Index>(options.krylov_dim) : std::max<Index>(2 * m + 20, 40);
  kmax = std::min(std::max(kmax, m + 1), n);

  MatrixX<Scalar> V(n, kmax + 1);
  MatrixX<Scalar> H = MatrixX<Scalar>::Zero(kmax, kmax);
  VectorX<Scalar> w(n);
  VectorX<Scalar> v0 = pseudo_random_vector<Scalar>(n, 0x5EEDULL + static_cast<std::uint64_t>(n));
  v0.normalize();
  V.col(0) = v0;

  std::size_t matvecs = 0;
  std::uint64_t refill_seed = 1;
  Index start = 0;  // first column whose H entries still need computing
  double anorm = 0.0;
  double achieved = std::numeric_limits<double>::infinity();

  for (std::size_t cycle = 0; cycle <= options.max_restarts; ++cycle) {
    Index p = start;
    double beta = 0.0;
    for (; p < kmax; ++p) {
      op(V.col(p), w);
      ++matvecs;
      VectorX<Scalar> h = V.leftCols(p + 1).adjoint() * w;
      w -= V.leftCols(p + 1) * h;
      const VectorX<Scalar> h2 = V.leftCols(p + 1).adjoint() * w;
      w -= V.leftCols(p + 1) * h2;
      h += h2;
      H.col(p).head(p + 1) = h;
      H.row(p).head(p + 1) = h.adjoint();
      H(p, p) = Scalar(std::real(h(p)));
      beta = w.norm();
      anorm = std::max(anorm, H.topLeftCorner(p + 1, p + 1).cwiseAbs().maxCoeff());
      if (p + 1 == n) {
        beta = 0.0;
        ++p;
        break;
      }
      if (beta <= 1e-13 * std::max(anorm, 1e-300)) {
        // Invariant subspace: continue from a fresh direction with zero coupling.
        VectorX<Scalar> fresh = pseudo_random_vector<Scalar>(n, 0xC0FFEEULL + refill_seed++);
        if (!orthogonalize<Scalar>(V.leftCols(p + 1), fresh)) {
          beta = 0.0;
          ++p;
          break;
        }
        V.col(p + 1) = fresh;
        w.setZero();
        beta = 0.0;
      } else {
        V.col(p + 1) = w / beta;
      }
    }

    // Rayleigh-Ritz on the projected matrix.
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> ritz(H.topLeftCorner(p, p));
    if (ritz.info() != Eigen::Success) throw NumericalError("Lanczos projected eigenproblem failed");
    const Eigen::VectorXd theta = ritz.eigenvalues().reverse();
    const MatrixX<Scalar> S = ritz.eigenvectors().rowwise().reverse();
    anorm = std::max({anorm, std::abs(theta(0)), std::abs(theta(p - 1))});
    const double scale = std::max(anorm, 1e-300);

    const Index wanted = std::min(m, p);
    double worst_estimate = 0.0;
    for (Index i = 0; i < wanted; ++i) worst_estimate = std::max(worst_estimate, beta * std::abs(S(p - 1, i)));

    const bool exhausted = (p == n) || beta == 0.0;
    if (wanted == m && (worst_estimate <= options.tol * scale || exhausted)) {
      EigenPairs<Scalar> out;
      out.values = theta.head(m);
      out.vectors = V.leftCols(p) * S.leftCols(m);
      for (Index j = 0; j < m; ++j) out.vectors.col(j).normalize();
      double worst = 0.0;
      VectorX<Scalar> Av(n);
      for (Index j = 0; j < m; ++j) {
        op(out.vectors.col(j), Av);
        ++matvecs;
        worst = std::max(worst, (Av - out.values(j) * out.vectors.col(j)).norm());
      }
      out.residual_bound = worst / scale;
      out.matvecs = matvecs;
      achieved = out.residual_bound;
      if (out.residual_bound <= options.tol || exhausted) return out;
    } else {
      achieved = worst_estimate / scale;
    }

    // Thick restart: keep the leading Ritz vectors, continue from the residual.
    const Index keep = std::min(std::max(m + (kmax - m) / 2, m + 1), kmax - 1);
    if (keep <= 0 || beta == 0.0) break;
    const MatrixX<Scalar> Y = V.leftCols(p) * S.leftCols(keep);
    const VectorX<Scalar> residual = V.col(p);
    V.leftCols(keep) = Y;
    V.col(keep) = residual;
    H.setZero();
    for (Index i = 0; i < keep; ++i) H(i, i) = Scalar(theta(i));
    start = keep;
  }
  std::ostringstream msg;
  msg << "Lanczos did not converge within " << options.max_restarts << " restarts (relative residual "
      << achieved << ")";
  throw ConvergenceError(msg.str(), achieved);
}

template <class Scalar>
EigenPairs<Scalar> hermitian_top_eigenpairs(const MatrixX<Scalar>& A, std::size_t m, const EigenOptions& options) {
  require_hermitian<Scalar>(A, options.hermitian_tol);
  const auto n = static_cast<std::size_t>(A.rows());
  const bool dense = options.method == EigenMethod::dense ||
                     (options.method == EigenMethod::automatic && n <= options.dense_crossover);
  if (dense) return dense_top_eigenpairs<Scalar>(A, m);
  const MatrixX<Scalar> H = (A + A.adjoint()) * 0.5;
  LinearOperator<Scalar> op = [&H](const VectorX<Scalar>& in, VectorX<Scalar>& out) { out.noalias() = H * in; };
  return lanczos_top_eigenpairs<Scalar>(op, n, m, options);
}

EigenPairs<double> hermitian_top_eigenpairs(const ToeplitzOperator& T, std::size_t m, const EigenOptions& options) {
  const std::size_t n = T.size();
  const bool dense = options.method == EigenMethod::dense ||
                     (options.method == EigenMethod::automatic && n <= options.dense_crossover);
  if (dense) return dense_top_eigenpairs<double>(T.dense(), m);
  LinearOperator<double> op = [&T](const Eigen::VectorXd& in, Eigen::VectorXd& out) { T.apply(in, out); };
  return lanczos_top_eigenpairs<double>(op, n, m, options);
}

template <class Scalar>
Eigen::VectorXd top_eigenvalues(const MatrixX<Scalar>& A, std::size_t m) {
  if (m == 0 || static_cast<Eigen::Index>(m) > A.rows()) throw InvalidArgument("requested eigenvalue count out of range");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(A, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("dense Hermitian eigensolver failed");
  return solver.eigenvalues().reverse().head(static_cast<Eigen::Index>(m));
}

Eigen::VectorXd align_sign(const Eigen::VectorXd& u, const Eigen::VectorXd& reference) {
  if (u.size() != reference.size()) throw InvalidArgument("align_sign: length mismatch");
  if (u.norm() == 0.0 || reference.norm() == 0.0) throw InvalidArgument("align_sign: zero vector");
  return reference.dot(u) < 0.0 ? Eigen::VectorXd(-u) : u;
}

Eigen::VectorXcd align_sign(const Eigen::VectorXcd& u, const Eigen::VectorXcd& reference) {
  if (u.size() != reference.size()) throw InvalidArgument("align_sign: length mismatch");
  if (u.norm() == 0.0 || reference.norm() == 0.0) throw InvalidArgument("align_sign: zero vector");
  const std::complex<double> inner = reference.dot(u);  // conjugates reference
  if (std::abs(inner) == 0.0) return u;
  return u * (std::conj(inner) / std::abs(inner));
}

template void require_hermitian<double>(const MatrixX<double>&, double);
template void require_hermitian<std::complex<double>>(const MatrixX<std::complex<double>>&, double);
template EigenPairs<double> dense_top_eigenpairs<double>(const MatrixX<double>&, std::size_t);
template EigenPairs<std::complex<double>> dense_top_eigenpairs<std::complex<double>>(
    const MatrixX<std::complex<double>>&, std::size_t);
template EigenPairs<double> lanczos_top_eigenpairs<double>(const LinearOperator<double>&, std::size_t, std::size_t,
                                                           const EigenOptions&);
template EigenPairs<std::complex<double>> lanczos_top_eigenpairs<std::complex<double>>(
    const LinearOperator<std::complex<double>>&, std::size_t, std::size_t, const EigenOptions&);
template EigenPairs<double> hermitian_top_eigenpairs<double>(const MatrixX<double>&, std::size_t,
                                                             const EigenOptions&);
template EigenPairs<std::complex<double>> hermitian_top_eigenpairs<std::complex<double>>(
    const MatrixX<std::complex<double>>&, std::size_t, const EigenOptions&);
template Eigen::VectorXd top_eigenvalues<double>(const MatrixX<double>&, std::size_t);
template Eigen::VectorXd top_eigenvalues<std::complex<double>>(const MatrixX<std::complex<double>>&, std::size_t);

}  // namespace lmrmt
