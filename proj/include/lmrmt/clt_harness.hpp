#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lmrmt/rmt_sampler.hpp"
#include "lmrmt/spike_predictor.hpp"

namespace lmrmt {

/// Sigma = (tr C^2 / N) (I_m + sigma) with
/// sigma_ij = (E|Z|^4 - |E Z^2|^2 - 2) sum_k u_ik^2 u_jk^2 + (sum_k u_ik u_jk)^2 |E Z^2|^2.
/// U holds the m eigenvectors as columns and must be orthonormal.
Eigen::MatrixXd theoretical_sigma(const EntryMoments& moments, const Eigen::VectorXd& c, const Eigen::MatrixXd& U);

struct CltOptions {
  std::size_t threads = 0;  ///< 0 = hardware concurrency
  std::size_t series_order = 10;
  /// Abort when more than this fraction of replications fail.
  double max_failure_fraction = 0.01;
};

struct CltReport {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t R = 0;
  std::size_t failures = 0;
  std::vector<SpikePrediction> predictions;
  Eigen::VectorXd lambda_gamma;              ///< top m eigenvalues of Gamma
  std::vector<std::size_t> replications;     ///< indices of successful replications
  Eigen::MatrixXd samples;                   ///< rows: replications, cols: Lambda_j
  Eigen::MatrixXd lambda_S;                  ///< same layout, top eigenvalues of S
  Eigen::VectorXd empirical_mean;
  std::optional<Eigen::MatrixXd> empirical_cov;  ///< absent when fewer than two samples
  Eigen::MatrixXd theoretical_cov;
  Eigen::VectorXd ks;    ///< NaN where the theoretical variance vanishes
  Eigen::VectorXd levy;  ///< same
  double max_offdiag_corr = 0.0;
  bool moment_requirement_met = true;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
  double seconds_per_replication = 0.0;

  nlohmann::json to_json() const;
  /// Columns rep, j, lambda_S, lambda_Gamma, Lambda.
  void write_samples_csv(std::ostream& os) const;
};

CltReport run_clt_experiment(const ModelConfig& config, std::size_t R, std::uint64_t seed,
                             const CltOptions& options = {});

struct SweepRow {
  std::size_t N = 0;
  std::size_t n = 0;
  std::size_t j = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double target = 0.0;  ///< tr C / N
  double abs_error = 0.0;
};

/// Ratios lambda_j(S) / lambda_j(Gamma) over `replications` draws per size.
/// An explicit C diagonal in the template is only allowed when all sizes share N.
std::vector<SweepRow> convergence_sweep(const ModelConfig& config_template,
                                        std::span<const std::pair<std::size_t, std::size_t>> sizes,
                                        std::size_t replications, std::uint64_t seed, std::size_t threads = 0);

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows);

/// Type-7 sample quantile.
double quantile(std::vector<double> values, double p);

}  // namespace lmrmt
