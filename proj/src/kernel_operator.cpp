#include "lmrmt/kernel_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lmrmt/errors.hpp"
#include "lmrmt/parallel.hpp"
#include "lmrmt/report_io.hpp"
#include "lmrmt/toeplitz_operator.hpp"

namespace lmrmt {

namespace {

// Second difference (d+1)^a - 2 d^a + |d-1|^a. For large d the direct form
// cancels catastrophically; there the even binomial series
// d^a * 2 sum_k C(a, 2k) d^(-2k) is summed instead.
double second_difference(double a, std::size_t d) {
  const double dd = static_cast<double>(d);
  if (d < 4) {
    return std::pow(dd + 1.0, a) - 2.0 * std::pow(dd, a) + std::pow(std::abs(dd - 1.0), a);
  }
  const double inv2 = 1.0 / (dd * dd);
  double binom = 1.0;  // C(a, j)
  double power = 1.0;  // d^(-2k)
  double sum = 0.0;
  for (int j = 1; j < 200; ++j) {
    binom *= (a - j + 1) / j;
    if (j % 2 == 1) continue;
    power *= inv2;
    const double term = binom * power;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return std::pow(dd, a) * 2.0 * sum;
}

// Antiderivative of |u|^-rho, odd in u.
double power_antiderivative(double u, double rho) {
  const double mag = std::pow(std::abs(u), 1.0 - rho) / (1.0 - rho);
  return u < 0 ? -mag : mag;
}

// Row vector w with w_i = int over cell i of |x - y|^-rho dy.
void cell_weights(double x, double rho, double h, std::size_t n, Eigen::VectorXd& w) {
  w.resize(static_cast<Eigen::Index>(n));
  double left = power_antiderivative(x, rho);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = power_antiderivative(x - static_cast<double>(i + 1) * h, rho);
    w(static_cast<Eigen::Index>(i)) = left - right;
    left = right;
  }
}

void validate_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw InvalidArgument("rho must lie in the open interval (0, 1), got " + std::to_string(rho));
  }
}

void validate_grid(std::size_t grid_n, std::size_t m) {
  if (m == 0) throw InvalidArgument("number of eigenpairs must be positive");
  if (grid_n < 4 * m) {
    throw InvalidArgument("grid resolution " + std::to_string(grid_n) + " is too coarse for " + std::to_string(m) +
                          " eigenpairs (need grid >= 4m)");
  }
}

// Fills functions, boundary values and signs from raw eigenvectors.
KernelEigenSystem finish_system(double rho, double tau, std::size_t grid_n, const EigenPairs<double>& pairs) {
  KernelEigenSystem sys;
  sys.rho = rho;
  sys.grid_n = grid_n;
  sys.interval = tau;
  sys.values = pairs.values;
  sys.residual_bound = pairs.residual_bound;
  const double h = tau / static_cast<double>(grid_n);
  sys.functions = pairs.vectors / std::sqrt(h);

  const std::size_t m = sys.count();
  sys.boundary_values.resize(static_cast<Eigen::Index>(m));
  sys.left_boundary_values.resize(static_cast<Eigen::Index>(m));
  Eigen::VectorXd w_right;
  Eigen::VectorXd w_left;
  cell_weights(tau, rho, h, grid_n, w_right);
  cell_weights(0.0, rho, h, grid_n, w_left);
  const double scale = std::abs(sys.values(0));
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    auto f = sys.functions.col(jj);
    const double lambda = sys.values(jj);
    if (std::abs(lambda) <= 1e-12 * scale) {
      // Null directions carry no endpoint information.
      sys.boundary_values(jj) = std::numeric_limits<double>::quiet_NaN();
      sys.left_boundary_values(jj) = std::numeric_limits<double>::quiet_NaN();
      Eigen::Index pivot = 0;
      f.cwiseAbs().maxCoeff(&pivot);
      if (f(pivot) < 0) f = -f;
      continue;
    }
    double right = w_right.dot(f) / lambda;
    if (right < 0) {
      f = -f;
      right = -right;
    }
    sys.boundary_values(jj) = right;
    sys.left_boundary_values(jj) = std::abs(w_left.dot(f) / lambda);
  }
  return sys;
}

}  // namespace

double KernelEigenSystem::evaluate(std::size_t j, double x) const {
  const double xs[1] = {x};
  return evaluate(j, std::span<const double>(xs, 1))(0);
}

Eigen::VectorXd KernelEigenSystem::evaluate(std::size_t j, std::span<const double> xs) const {
  if (j >= count()) throw InvalidArgument("eigenfunction index out of range");
  const auto jj = static_cast<Eigen::Index>(j);
  const double h = interval / static_cast<double>(grid_n);
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::VectorXd w;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    cell_weights(xs[k], rho, h, grid_n, w);
    out(static_cast<Eigen::Index>(k)) = w.dot(functions.col(jj)) / values(jj);
  }
  return out;
}

Eigen::MatrixXd KernelEigenSystem::evaluate_all(std::span<const double> xs) const {
  const double h = interval / static_cast<double>(grid_n);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), values.size());
  Eigen::VectorXd w;
  const Eigen::ArrayXd inv = values.array().inverse();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    cell_weights(xs[k], rho, h, grid_n, w);
    out.row(static_cast<Eigen::Index>(k)) = ((w.transpose() * functions).array() * inv.transpose()).matrix();
  }
  return out;
}

nlohmann::json KernelEigenSystem::to_json() const {
  nlohmann::json j;
  j["rho"] = rho;
  j["grid_n"] = grid_n;
  j["interval"] = interval;
  j["values"] = lmrmt::to_json(values);
  j["boundary_values"] = lmrmt::to_json(boundary_values);
  j["left_boundary_values"] = lmrmt::to_json(left_boundary_values);
  j["residual_bound"] = residual_bound;
  nlohmann::json fs = nlohmann::json::array();
  for (Eigen::Index c = 0; c < functions.cols(); ++c) {
    fs.push_back(std::vector<double>(functions.col(c).data(), functions.col(c).data() + functions.rows()));
  }
  j["functions"] = fs;
  return j;
}

std::vector<double> kernel_matrix_column(double rho, std::size_t grid_n, double tau) {
  if (grid_n == 0) throw InvalidArgument("grid resolution must be positive");
  if (!(tau > 0.0)) throw InvalidArgument("interval length must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in [0, 1)");
  const double h = tau / static_cast<double>(grid_n);
  std::vector<double> col(grid_n);
  if (rho == 0.0) {
    std::fill(col.begin(), col.end(), h);
    return col;
  }
  const double a = 2.0 - rho;
  const double scale = std::pow(h, 1.0 - rho) / ((1.0 - rho) * (2.0 - rho));
  for (std::size_t d = 0; d < grid_n; ++d) col[d] = scale * second_difference(a, d);
  return col;
}

KernelEigenSystem kernel_eigs_on_interval(double rho, double tau, std::size_t grid_n, std::size_t m,
                                          const EigenOptions& options) {
  validate_rho(rho);
  validate_grid(grid_n, m);
  const ToeplitzOperator op(kernel_matrix_column(rho, grid_n, tau));
  return finish_system(rho, tau, grid_n, hermitian_top_eigenpairs(op, m, options));
}

KernelEigenSystem kernel_eigs(double rho, std::size_t grid_n, std::size_t m, const EigenOptions& options) {
  return kernel_eigs_on_interval(rho, 1.0, grid_n, m, options);
}

namespace testing {

KernelEigenSystem constant_kernel_eigs(std::size_t grid_n, std::size_t m) {
  validate_grid(grid_n, m);
  const ToeplitzOperator op(kernel_matrix_column(0.0, grid_n, 1.0));
  EigenOptions options;
  options.method = EigenMethod::dense;
  return finish_system(0.0, 1.0, grid_n, hermitian_top_eigenpairs(op, m, options));
}

}  // namespace testing

Eigen::VectorXd boundary_check(const KernelEigenSystem& system) {
  const double target = std::sqrt(1.0 - system.rho);
  return (system.boundary_values.array() - target).abs().matrix();
}

double richardson_extrapolate(double coarse, double fine, double order) {
  if (!(order > 0.0)) throw InvalidArgument("Richardson order must be positive");
  return fine + (fine - coarse) / (std::pow(2.0, order) - 1.0);
}

std::vector<ToeplitzKernelRow> toeplitz_vs_kernel_report(const ToeplitzSpec& spec, std::span<const std::size_t> sizes,
                                                         std::size_t j_max, const KernelEigenSystem& kernel,
                                                         std::size_t threads) {
  if (sizes.empty()) throw InvalidArgument("size ladder is empty");
  if (!std::is_sorted(sizes.begin(), sizes.end()) || std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end()) {
    throw InvalidArgument("sizes must be strictly increasing");
  }
  if (j_max == 0 || j_max > kernel.count()) throw InvalidArgument("j_max must be in [1, kernel eigenpair count]");
  if (std::abs(kernel.rho - spec.rho()) > 1e-12) throw InvalidArgument("kernel system rho does not match the Toeplitz model");

  const double rho = spec.rho();
  const double constant = spec.route() == Route::density
                              ? density_asymptotic_constant(rho, spec.quadrature().normalization)
                              : 1.0;
  AutocovarianceSequence sequence(spec);
  // Coefficients up front so the parallel tasks only read the cache.
  sequence.first(sizes.back());

  std::vector<std::vector<ToeplitzKernelRow>> per_size(sizes.size());
  parallel_for(sizes.size(), threads, [&](std::size_t s) {
    const std::size_t n = sizes[s];
    const std::size_t m = std::min(j_max, n);
    const ToeplitzOperator op(build_toeplitz(sequence, n).first_column);
    const EigenPairs<double> pairs = hermitian_top_eigenpairs(op, m);
    const double nn = static_cast<double>(n);
    const double scale = constant * std::pow(nn, 1.0 - rho) * spec.L()(nn);

    std::vector<double> xs(n);
    for (std::size_t k = 0; k < n; ++k) xs[k] = static_cast<double>(k + 1) / nn;
    const Eigen::MatrixXd f = kernel.evaluate_all(xs);

    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd u = std::sqrt(nn) * pairs.vectors.col(jj);
      const Eigen::VectorXd aligned = align_sign(u, f.col(jj));
      ToeplitzKernelRow row;
      row.n = n;
      row.j = j + 1;
      row.lambda = pairs.values(jj);
      row.ratio = row.lambda / scale;
      row.target = kernel.values(jj);
      row.sup_dev = (aligned - f.col(jj)).cwiseAbs().maxCoeff();
      row.deloc = u.cwiseAbs().maxCoeff();
      row.scaled_vector = aligned;
      row.kernel_values = f.col(jj);
      per_size[s].push_back(std::move(row));
    }
  });

  std::vector<ToeplitzKernelRow> rows;
  for (auto& block : per_size) rows.insert(rows.end(), block.begin(), block.end());
  return rows;
}

std::vector<ToeplitzPairRow> compare_toeplitz_pair(double rho, const SlowlyVarying& L, std::span<const std::size_t> sizes,
                                                   const DensityQuadrature& quadrature, std::size_t threads) {
  if (sizes.empty()) throw InvalidArgument("size ladder is empty");
  if (!std::is_sorted(sizes.begin(), sizes.end()) || std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end()) {
    throw InvalidArgument("sizes must be strictly increasing");
  }
  AutocovarianceSequence seq(ToeplitzSpec(rho, L, Route::density, quadrature));
  AutocovarianceSequence seq_ref(ToeplitzSpec(rho, SlowlyVarying::constant(1.0), Route::density, quadrature));
  seq.first(sizes.back());
  seq_ref.first(sizes.back());

  std::vector<ToeplitzPairRow> rows(sizes.size());
  parallel_for(sizes.size(), threads, [&](std::size_t s) {
    const std::size_t n = sizes[s];
    const double nn = static_cast<double>(n);
    const double base = std::pow(nn, 1.0 - rho);
    const std::vector<double> col = seq.first(n);
    const std::vector<double> col_ref = seq_ref.first(n);

    std::vector<double> diff(n);
    bool all_zero = true;
    for (std::size_t k = 0; k < n; ++k) {
      diff[k] = col[k] / (base * L(nn)) - col_ref[k] / base;
      all_zero = all_zero && diff[k] == 0.0;
    }

    ToeplitzPairRow row;
    row.n = n;
    if (!all_zero) {
      // ||D||_2 = sqrt(lambda_max(D^2)); Lanczos on D^2 is a Krylov-accelerated
      // power iteration.
      const ToeplitzOperator dop(diff);
      Eigen::VectorXd tmp(static_cast<Eigen::Index>(n));
      const LinearOperator<double> square = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
        dop.apply(in, tmp);
        dop.apply(tmp, out);
      };
      EigenOptions options;
      options.tol = 1e-10;
      const auto top = lanczos_top_eigenpairs<double>(square, n, 1, options);
      row.norm_difference = std::sqrt(std::max(0.0, top.values(0)));
    }

    const std::size_t m = std::min<std::size_t>(3, n);
    const ToeplitzOperator op(col);
    const ToeplitzOperator op_ref(col_ref);
    const auto pairs = hermitian_top_eigenpairs(op, m);
    const auto pairs_ref = hermitian_top_eigenpairs(op_ref, m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd u = pairs.vectors.col(jj);
      row.eigvec_distances.push_back((u - align_sign(pairs_ref.vectors.col(jj), u)).norm());
    }
    rows[s] = std::move(row);
  });
  return rows;
}

void write_report_csv(std::ostream& os, std::span<const ToeplitzKernelRow> rows) {
  CsvWriter csv(os);
  csv.row({"n", "j", "ratio", "target", "sup_dev", "deloc"});
  for (const auto& r : rows) csv.values(r.n, r.j, r.ratio, r.target, r.sup_dev, r.deloc);
}

void write_pair_csv(std::ostream& os, std::span<const ToeplitzPairRow> rows) {
  CsvWriter csv(os);
  csv.row({"n", "norm_difference", "evec_dist_1", "evec_dist_2", "evec_dist_3"});
  for (const auto& r : rows) {
    std::vector<std::string> fields{std::to_string(r.n), format_double(r.norm_difference)};
    for (std::size_t j = 0; j < 3; ++j) {
      fields.push_back(j < r.eigvec_distances.size() ? format_double(r.eigvec_distances[j]) : "");
    }
    csv.row(fields);
  }
}

void write_functions_csv(std::ostream& os, const KernelEigenSystem& system) {
  CsvWriter csv(os);
  std::vector<std::string> header{"x"};
  for (std::size_t j = 0; j < system.count(); ++j) header.push_back("f_" + std::to_string(j + 1));
  csv.row(header);
  const double h = system.interval / static_cast<double>(system.grid_n);
  for (std::size_t i = 0; i < system.grid_n; ++i) {
    std::vector<std::string> fields{format_double((static_cast<double>(i) + 0.5) * h)};
    for (Eigen::Index j = 0; j < system.functions.cols(); ++j) {
      fields.push_back(format_double(system.functions(static_cast<Eigen::Index>(i), j)));
    }
    csv.row(fields);
  }
}

}  // namespace lmrmt
