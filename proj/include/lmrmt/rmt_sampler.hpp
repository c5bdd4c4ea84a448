#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lmrmt/covariance_models.hpp"
#include "lmrmt/spike_predictor.hpp"

namespace lmrmt {

enum class EntryLaw { real_gaussian, complex_gaussian, rademacher, uniform_scaled, complex_circular_rademacher };

struct EntryMoments {
  double abs2 = 1.0;
  double sq = 1.0;  ///< E Z^2 (real for every supported law)
  double abs4 = 3.0;
  bool abs6_finite = true;
  bool abs8_finite = true;
};

EntryMoments law_moments(EntryLaw law);
bool is_complex(EntryLaw law);
std::string to_string(EntryLaw law);
EntryLaw entry_law_from_string(const std::string& name);

/// Philox4x32-10 counter-based generator.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Entry (i, k) of replication r under master seed s uses Philox block
/// counter (i + N k, r), key s; results never depend on evaluation order.
struct RandomStream {
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;
};

/// Throws InvalidArgument for complex laws.
Eigen::MatrixXd sample_Z_real(EntryLaw law, std::size_t N, std::size_t n, RandomStream stream);
/// Any law; real laws come back with zero imaginary parts.
Eigen::MatrixXcd sample_Z_complex(EntryLaw law, std::size_t N, std::size_t n, RandomStream stream);

/// Population covariance C: identity or an explicit diagonal.
struct CSpec {
  std::optional<Eigen::VectorXd> diagonal;  ///< empty means identity
};

/// Population covariance Gamma: Toeplitz, explicit diagonal, or spikes
/// followed by the tail k^-tail_exponent for the remaining indices k.
struct GammaSpec {
  std::optional<ToeplitzSpec> toeplitz;
  std::optional<Eigen::VectorXd> diagonal;
  std::vector<double> spikes;
  double tail_exponent = 2.0;
};

struct ModelConfig {
  std::size_t N = 0;
  std::size_t n = 0;
  CSpec C;
  GammaSpec Gamma;
  EntryLaw law = EntryLaw::real_gaussian;
  std::size_t m = 1;
  /// Tracked spikes need lambda_{j+1}(Gamma) / lambda_j(Gamma) <= this for j <= m.
  double max_gap_ratio = 0.999;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Config with eagerly computed C^(1/2), Gamma spectrum, eigenvectors and Gamma^(1/2).
/// Read-only after construction, so replications may share it.
struct PreparedModel {
  ModelConfig config;
  Eigen::VectorXd c;       ///< C spectrum (diagonal), length N
  Eigen::VectorXd sqrt_c;
  Eigen::VectorXd t;       ///< Gamma spectrum, descending, clamped at 0
  Eigen::MatrixXd U;       ///< n x m top eigenvectors of Gamma
  bool gamma_diagonal = false;
  Eigen::VectorXd gamma_sqrt_diag;  ///< diagonal case, in the original index order
  Eigen::MatrixXd gamma_sqrt;       ///< dense case
  std::vector<std::string> warnings;

  PopulationModel population() const { return PopulationModel(c, t); }
};

/// Validates and prepares. Throws InvalidArgument on bad dimensions, spectra or
/// insufficient spike gaps.
PreparedModel prepare_model(const ModelConfig& config);

/// S = B B* / N with B = C^(1/2) Z Gamma^(1/2).
Eigen::MatrixXd assemble_S(const PreparedModel& model, const Eigen::MatrixXd& Z);
Eigen::MatrixXcd assemble_S(const PreparedModel& model, const Eigen::MatrixXcd& Z);

/// sqrt(N) (lambda_j(S) / lambda_j(Gamma) - theta_j), j = 1..m, from the top eigenvalues of S.
Eigen::VectorXd lambda_stats(const PreparedModel& model, const Eigen::VectorXd& top_eigs_S,
                             std::span<const double> theta);

struct ReplicationSample {
  Eigen::VectorXd lambda_S;  ///< top m eigenvalues of S
  Eigen::VectorXd Lambda;
};

/// One full replication: sample Z, assemble S, extract the top eigenvalues.
ReplicationSample run_replication(const PreparedModel& model, std::span<const double> theta, RandomStream stream);

}  // namespace lmrmt
