#include "lmrmt/toeplitz_operator.hpp"

#include <complex>
#include <mutex>

#include <fftw3.h>

#include "lmrmt/errors.hpp"

namespace lmrmt {

namespace {

// FFTW's planner is not thread-safe; execution of existing plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t embedding_length(std::size_t n) {
  std::size_t len = 1;
  while (len < 2 * n - 1) len <<= 1;
  return std::max<std::size_t>(len, 2);
}

}  // namespace

struct ToeplitzOperator::Impl {
  std::size_t n = 0;
  std::size_t len = 0;
  double* real_buf = nullptr;
  fftw_complex* spec_buf = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> symbol;  // FFT of the circulant's first column
  mutable std::mutex apply_mutex;

  explicit Impl(const std::vector<double>& column) : n(column.size()), len(embedding_length(column.size())) {
    const std::size_t bins = len / 2 + 1;
    real_buf = fftw_alloc_real(len);
    spec_buf = fftw_alloc_complex(bins);
    {
      std::lock_guard lock(planner_mutex());
      forward = fftw_plan_dft_r2c_1d(static_cast<int>(len), real_buf, spec_buf, FFTW_ESTIMATE);
      backward = fftw_plan_dft_c2r_1d(static_cast<int>(len), spec_buf, real_buf, FFTW_ESTIMATE);
    }
    std::fill(real_buf, real_buf + len, 0.0);
    for (std::size_t k = 0; k < n; ++k) real_buf[k] = column[k];
    for (std::size_t k = 1; k < n; ++k) real_buf[len - k] = column[k];
    fftw_execute(forward);
    symbol.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) symbol[b] = {spec_buf[b][0], spec_buf[b][1]};
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real_buf);
    fftw_free(spec_buf);
  }

  void apply(const double* in, double* out) const {
    std::lock_guard lock(apply_mutex);
    std::fill(real_buf, real_buf + len, 0.0);
    std::copy(in, in + n, real_buf);
    fftw_execute(forward);
    const std::size_t bins = len / 2 + 1;
    for (std::size_t b = 0; b < bins; ++b) {
      const std::complex<double> v = std::complex<double>(spec_buf[b][0], spec_buf[b][1]) * symbol[b];
      spec_buf[b][0] = v.real();
      spec_buf[b][1] = v.imag();
    }
    fftw_execute(backward);
    const double scale = 1.0 / static_cast<double>(len);
    for (std::size_t k = 0; k < n; ++k) out[k] = real_buf[k] * scale;
  }
};

ToeplitzOperator::ToeplitzOperator(std::vector<double> first_column) : column_(std::move(first_column)) {
  if (column_.empty()) throw InvalidArgument("Toeplitz operator needs a non-empty first column");
  impl_ = std::make_unique<Impl>(column_);
}

ToeplitzOperator::~ToeplitzOperator() = default;
ToeplitzOperator::ToeplitzOperator(ToeplitzOperator&&) noexcept = default;
ToeplitzOperator& ToeplitzOperator::operator=(ToeplitzOperator&&) noexcept = default;

void ToeplitzOperator::apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  if (static_cast<std::size_t>(in.size()) != size()) throw InvalidArgument("Toeplitz matvec: length mismatch");
  out.resize(in.size());
  impl_->apply(in.data(), out.data());
}

Eigen::VectorXd ToeplitzOperator::apply(const Eigen::VectorXd& in) const {
  Eigen::VectorXd out;
  apply(in, out);
  return out;
}

Eigen::MatrixXd ToeplitzOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = column_[static_cast<std::size_t>(std::abs(i - j))];
  }
  return A;
}

Eigen::VectorXd toeplitz_matvec(std::span<const double> first_column, std::span<const double> v) {
  if (first_column.size() != v.size()) throw InvalidArgument("Toeplitz matvec: length mismatch");
  const ToeplitzOperator op(std::vector<double>(first_column.begin(), first_column.end()));
  const Eigen::VectorXd in = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return op.apply(in);
}

}  // namespace lmrmt
