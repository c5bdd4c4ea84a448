#include "lmrmt/clt_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "lmrmt/distances.hpp"
#include "lmrmt/errors.hpp"
#include "lmrmt/parallel.hpp"
#include "lmrmt/report_io.hpp"

namespace lmrmt {

namespace {

// Neumaier accumulator for index-ordered reductions.
struct Accumulator {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double s = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - s) + v;
    } else {
      carry += (v - s) + sum;
    }
    sum = s;
  }
  double value() const { return sum + carry; }
};

}  // namespace

Eigen::MatrixXd theoretical_sigma(const EntryMoments& moments, const Eigen::VectorXd& c, const Eigen::MatrixXd& U) {
  if (c.size() == 0) throw InvalidArgument("C spectrum is empty");
  const Eigen::Index m = U.cols();
  const Eigen::MatrixXd gram = U.transpose() * U;
  if ((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-8) {
    throw InvalidArgument("eigenvector columns are not orthonormal");
  }
  const double sq2 = moments.sq * moments.sq;
  const double kappa = moments.abs4 - sq2 - 2.0;
  const Eigen::MatrixXd U2 = U.cwiseAbs2();
  Eigen::MatrixXd sigma(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      Accumulator fourth;
      Accumulator cross;
      for (Eigen::Index k = 0; k < U.rows(); ++k) {
        fourth.add(U2(k, i) * U2(k, j));
        cross.add(U(k, i) * U(k, j));
      }
      sigma(i, j) = kappa * fourth.value() + cross.value() * cross.value() * sq2;
    }
  }
  Accumulator trc2;
  for (Eigen::Index i = 0; i < c.size(); ++i) trc2.add(c(i) * c(i));
  const double scale = trc2.value() / static_cast<double>(c.size());
  return scale * (Eigen::MatrixXd::Identity(m, m) + sigma);
}

nlohmann::json CltReport::to_json() const {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["seed"] = seed;
  j["R"] = R;
  j["failures"] = failures;
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : predictions) preds.push_back(p.to_json());
  j["predictions"] = preds;
  j["lambda_gamma"] = lmrmt::to_json(lambda_gamma);
  j["empirical_mean"] = lmrmt::to_json(empirical_mean);
  if (empirical_cov) {
    j["empirical_cov"] = lmrmt::to_json(*empirical_cov);
    j["empirical_cov_absent"] = false;
  } else {
    j["empirical_cov"] = nullptr;
    j["empirical_cov_absent"] = true;
  }
  j["theoretical_cov"] = lmrmt::to_json(theoretical_cov);
  auto nullable = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::isnan(v(i))) {
        a.push_back(nullptr);
      } else {
        a.push_back(v(i));
      }
    }
    return a;
  };
  j["ks"] = nullable(ks);
  j["levy"] = nullable(levy);
  j["max_offdiag_corr"] = max_offdiag_corr;
  j["moment_requirement_met"] = moment_requirement_met;
  j["warnings"] = warnings;
  j["samples"] = lmrmt::to_json(samples);
  j["timing"] = {{"wall_seconds", wall_seconds}, {"seconds_per_replication", seconds_per_replication}};
  return j;
}

void CltReport::write_samples_csv(std::ostream& os) const {
  CsvWriter csv(os);
  csv.row({"rep", "j", "lambda_S", "lambda_Gamma", "Lambda"});
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      csv.values(replications[static_cast<std::size_t>(r)], static_cast<std::size_t>(j + 1), lambda_S(r, j),
                 lambda_gamma(j), samples(r, j));
    }
  }
}

CltReport run_clt_experiment(const ModelConfig& config, std::size_t R, std::uint64_t seed, const CltOptions& options) {
  if (R == 0) throw InvalidArgument("replication count must be positive");
  const auto start = std::chrono::steady_clock::now();

  const PreparedModel model = prepare_model(config);
  const PopulationModel population = model.population();
  const std::size_t m = config.m;

  CltReport report;
  report.config = config;
  report.seed = seed;
  report.R = R;
  report.warnings = model.warnings;
  report.lambda_gamma = model.t.head(static_cast<Eigen::Index>(m));

  std::vector<double> theta(m);
  for (std::size_t j = 1; j <= m; ++j) {
    SpikePrediction p;
    try {
      p = predict_spike(j, population, options.series_order, true);
    } catch (const ConvergenceError&) {
      p = predict_spike(j, population, options.series_order, false);
      report.warnings.push_back("deterministic-equivalent cross-check did not converge for j = " + std::to_string(j));
    }
    theta[j - 1] = p.theta_root;
    report.predictions.push_back(std::move(p));
  }

  const EntryMoments moments = law_moments(config.law);
  if (config.Gamma.toeplitz && config.Gamma.toeplitz->rho() >= 0.5 && !moments.abs8_finite) {
    report.moment_requirement_met = false;
    report.warnings.push_back("entry law lacks a finite eighth moment required for rho >= 1/2");
  }
  report.theoretical_cov = theoretical_sigma(moments, model.c, model.U);

  // Pre-indexed buffer: slot r belongs to replication r regardless of scheduling.
  std::vector<std::optional<ReplicationSample>> slots(R);
  std::vector<std::string> errors(R);
  parallel_for(R, options.threads, [&](std::size_t r) {
    try {
      slots[r] = run_replication(model, theta, RandomStream{seed, r});
    } catch (const NumericalError& e) {
      errors[r] = e.what();
    }
  });

  for (std::size_t r = 0; r < R; ++r) {
    if (slots[r]) {
      report.replications.push_back(r);
    } else {
      ++report.failures;
    }
  }
  if (static_cast<double>(report.failures) > options.max_failure_fraction * static_cast<double>(R)) {
    const auto first = std::find_if(errors.begin(), errors.end(), [](const std::string& s) { return !s.empty(); });
    std::ostringstream msg;
    msg << report.failures << " of " << R << " replications failed";
    if (first != errors.end()) msg << " (first: " << *first << ")";
    throw NumericalError(msg.str());
  }
  if (report.failures > 0) {
    report.warnings.push_back(std::to_string(report.failures) + " replications failed and were excluded");
  }

  const auto kept = static_cast<Eigen::Index>(report.replications.size());
  const auto mm = static_cast<Eigen::Index>(m);
  report.samples.resize(kept, mm);
  report.lambda_S.resize(kept, mm);
  for (Eigen::Index r = 0; r < kept; ++r) {
    const auto& s = *slots[report.replications[static_cast<std::size_t>(r)]];
    report.samples.row(r) = s.Lambda.transpose();
    report.lambda_S.row(r) = s.lambda_S.transpose();
  }

  report.empirical_mean.resize(mm);
  for (Eigen::Index j = 0; j < mm; ++j) {
    Accumulator acc;
    for (Eigen::Index r = 0; r < kept; ++r) acc.add(report.samples(r, j));
    report.empirical_mean(j) = acc.value() / static_cast<double>(kept);
  }
  if (kept >= 2) {
    Eigen::MatrixXd cov(mm, mm);
    for (Eigen::Index a = 0; a < mm; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) {
        Accumulator acc;
        for (Eigen::Index r = 0; r < kept; ++r) {
          acc.add((report.samples(r, a) - report.empirical_mean(a)) * (report.samples(r, b) - report.empirical_mean(b)));
        }
        cov(a, b) = cov(b, a) = acc.value() / static_cast<double>(kept - 1);
      }
    }
    report.empirical_cov = cov;
    for (Eigen::Index a = 0; a < mm; ++a) {
      for (Eigen::Index b = 0; b < a; ++b) {
        const double denom = std::sqrt(cov(a, a) * cov(b, b));
        if (denom > 0.0) report.max_offdiag_corr = std::max(report.max_offdiag_corr, std::abs(cov(a, b)) / denom);
      }
    }
  }

  report.ks = Eigen::VectorXd::Constant(mm, std::numeric_limits<double>::quiet_NaN());
  report.levy = report.ks;
  for (Eigen::Index j = 0; j < mm; ++j) {
    const double var = report.theoretical_cov(j, j);
    if (!(var > 1e-12) || kept == 0) continue;
    std::vector<double> col(static_cast<std::size_t>(kept));
    for (Eigen::Index r = 0; r < kept; ++r) col[static_cast<std::size_t>(r)] = report.samples(r, j);
    report.ks(j) = ks_statistic(col, var);
    report.levy(j) = levy_distance(col, var);
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.seconds_per_replication = report.wall_seconds / static_cast<double>(R);
  return report;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SweepRow> convergence_sweep(const ModelConfig& config_template,
                                        std::span<const std::pair<std::size_t, std::size_t>> sizes,
                                        std::size_t replications, std::uint64_t seed, std::size_t threads) {
  if (sizes.empty()) throw InvalidArgument("size ladder is empty");
  if (replications < 1) throw InvalidArgument("replication count must be positive");
  for (std::size_t s = 1; s < sizes.size(); ++s) {
    if (sizes[s].first <= sizes[s - 1].first || sizes[s].second <= sizes[s - 1].second) {
      throw InvalidArgument("sizes must be strictly increasing");
    }
  }
  const double ratio0 = static_cast<double>(sizes[0].first) / static_cast<double>(sizes[0].second);
  for (const auto& [N, n] : sizes) {
    if (std::abs(static_cast<double>(N) / static_cast<double>(n) - ratio0) > 1e-12 * ratio0) {
      throw InvalidArgument("all sizes must share the ratio N / n");
    }
  }
  if (config_template.C.diagonal) throw InvalidArgument("convergence sweep needs C = identity (sizes vary N)");

  std::vector<SweepRow> rows;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    ModelConfig cfg = config_template;
    cfg.N = sizes[s].first;
    cfg.n = sizes[s].second;
    const PreparedModel model = prepare_model(cfg);
    const std::size_t m = cfg.m;
    const std::vector<double> unused_theta(m, 0.0);
    std::vector<Eigen::VectorXd> ratios(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
      const RandomStream stream{seed, (static_cast<std::uint64_t>(s) << 32) | r};
      const ReplicationSample rep = run_replication(model, unused_theta, stream);
      ratios[r] = rep.lambda_S.array() / model.t.head(static_cast<Eigen::Index>(m)).array();
    });
    const double target = model.c.mean();
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> v(replications);
      for (std::size_t r = 0; r < replications; ++r) v[r] = ratios[r](static_cast<Eigen::Index>(j));
      SweepRow row;
      row.N = cfg.N;
      row.n = cfg.n;
      row.j = j + 1;
      row.median = quantile(v, 0.5);
      row.q25 = quantile(v, 0.25);
      row.q75 = quantile(v, 0.75);
      row.target = target;
      row.abs_error = std::abs(row.median - target);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  CsvWriter csv(os);
  csv.row({"N", "n", "j", "median", "q25", "q75", "target", "abs_error"});
  for (const auto& r : rows) csv.values(r.N, r.n, r.j, r.median, r.q25, r.q75, r.target, r.abs_error);
}

}  // namespace lmrmt
