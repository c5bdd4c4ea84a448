#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lmrmt {

/// Symmetric real Toeplitz matrix applied through a circulant embedding.
///
/// The embedding length is the smallest power of two >= 2n - 1; one product
/// costs two real FFTs of that length. `apply` serialises on an internal
/// mutex, so a single instance may be shared but not used concurrently for
/// throughput.
class ToeplitzOperator {
 public:
  explicit ToeplitzOperator(std::vector<double> first_column);
  ~ToeplitzOperator();
  ToeplitzOperator(ToeplitzOperator&&) noexcept;
  ToeplitzOperator& operator=(ToeplitzOperator&&) noexcept;
  ToeplitzOperator(const ToeplitzOperator&) = delete;
  ToeplitzOperator& operator=(const ToeplitzOperator&) = delete;

  std::size_t size() const noexcept { return column_.size(); }
  const std::vector<double>& first_column() const noexcept { return column_; }

  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& in) const;
  Eigen::MatrixXd dense() const;

 private:
  struct Impl;
  std::vector<double> column_;
  std::unique_ptr<Impl> impl_;
};

/// T v for the symmetric Toeplitz matrix with the given first column.
Eigen::VectorXd toeplitz_matvec(std::span<const double> first_column, std::span<const double> v);

}  // namespace lmrmt
