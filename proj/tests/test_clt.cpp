#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "lmrmt/clt_harness.hpp"
#include "lmrmt/distances.hpp"
#include "lmrmt/errors.hpp"

using namespace lmrmt;

namespace {

// Direct evaluation of the Levy definition on a dense x grid, for a point
// mass at 0 against N(0, 1): the smallest eps with
// H(x - eps) - eps <= Phi(x) <= H(x + eps) + eps everywhere.
double levy_point_mass_oracle() {
  boost::math::normal_distribution<double> nd;
  auto ok = [&](double eps) {
    std::vector<double> xs;
    for (double x = -8.0; x <= 8.0; x += 1e-4) xs.push_back(x);
    // The shifted steps jump at x = +-eps; the binding points sit there.
    xs.push_back(eps);
    xs.push_back(-eps);
    for (double x : xs) {
      const double lo = (x - eps >= 0.0 ? 1.0 : 0.0) - eps;
      const double hi = (x + eps >= 0.0 ? 1.0 : 0.0) + eps;
      const double g = boost::math::cdf(nd, x);
      if (g < lo - 1e-12 || g > hi + 1e-12) return false;
    }
    return true;
  };
  double a = 0.0, b = 0.5;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (a + b);
    (ok(mid) ? b : a) = mid;
  }
  return b;
}

ModelConfig toeplitz_model(std::size_t N, std::size_t n, EntryLaw law) {
  ModelConfig cfg;
  cfg.N = N;
  cfg.n = n;
  cfg.Gamma.toeplitz = ToeplitzSpec(0.4, SlowlyVarying::constant(1.0), Route::decay);
  cfg.law = law;
  cfg.m = 2;
  return cfg;
}

}  // namespace

TEST_CASE("theoretical sigma: Gaussian cases") {
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(4, 2);
  U.col(0) = Eigen::Vector4d(0.5, 0.5, 0.5, 0.5);
  U.col(1) = Eigen::Vector4d(0.5, -0.5, 0.5, -0.5);
  const Eigen::VectorXd c = Eigen::VectorXd::Ones(10);
  const Eigen::MatrixXd real = theoretical_sigma(law_moments(EntryLaw::real_gaussian), c, U);
  CHECK(real.isApprox(2.0 * Eigen::MatrixXd::Identity(2, 2)));
  const Eigen::MatrixXd cplx = theoretical_sigma(law_moments(EntryLaw::complex_gaussian), c, U);
  CHECK(cplx.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  const Eigen::VectorXd c2 = Eigen::VectorXd::Constant(10, 2.0);
  CHECK(theoretical_sigma(law_moments(EntryLaw::real_gaussian), c2, U).isApprox(8.0 * Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("theoretical sigma: diagonal Gamma reduces to (E|Z|^4 - 1) tr C^2 / N") {
  const Eigen::MatrixXd U = Eigen::MatrixXd::Identity(5, 3);
  const Eigen::VectorXd c = (Eigen::VectorXd(4) << 1.0, 2.0, 0.5, 1.5).finished();
  const double trc2 = c.squaredNorm() / 4.0;
  for (EntryLaw law : {EntryLaw::real_gaussian, EntryLaw::rademacher, EntryLaw::uniform_scaled,
                       EntryLaw::complex_gaussian, EntryLaw::complex_circular_rademacher}) {
    const EntryMoments mom = law_moments(law);
    const Eigen::MatrixXd S = theoretical_sigma(mom, c, U);
    for (int j = 0; j < 3; ++j) CHECK(S(j, j) == doctest::Approx((mom.abs4 - 1.0) * trc2).epsilon(1e-14));
    CHECK(std::abs(S(0, 1)) <= 1e-15);
  }
  CHECK(theoretical_sigma(law_moments(EntryLaw::rademacher), c, U)(0, 0) == 0.0);
}

TEST_CASE("theoretical sigma rejects non-orthonormal U") {
  const Eigen::MatrixXd U = Eigen::MatrixXd::Ones(3, 2);
  CHECK_THROWS_AS(theoretical_sigma(law_moments(EntryLaw::real_gaussian), Eigen::VectorXd::Ones(3), U),
                  InvalidArgument);
}

TEST_CASE("KS statistic examples") {
  const std::vector<double> zero = {0.0};
  CHECK(ks_statistic(zero, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  boost::math::normal_distribution<double> nd;
  const int R = 1000;
  std::vector<double> q(R);
  for (int i = 0; i < R; ++i) q[i] = boost::math::quantile(nd, (i + 0.5) / R);
  CHECK(ks_statistic(q, 1.0) <= 0.5 / R + 1e-12);
  CHECK(levy_distance(q, 1.0) <= 0.5 / R + 1e-12);
  CHECK_THROWS_AS(ks_statistic(q, 0.0), InvalidArgument);
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, 1.0), InvalidArgument);
}

TEST_CASE("KS on N(0, 2) draws stays under the 1% critical value") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, std::sqrt(2.0));
  std::vector<double> x(2000);
  for (double& v : x) v = g(rng);
  CHECK(ks_statistic(x, 2.0) <= 1.63 / std::sqrt(2000.0));
}

TEST_CASE("Levy distance of a point mass agrees with a dense-grid oracle") {
  const std::vector<double> zero = {0.0};
  CHECK(levy_distance(zero, 1.0) == doctest::Approx(levy_point_mass_oracle()).epsilon(1e-6));
}

TEST_CASE("Levy never exceeds KS") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::normal_distribution<double> g(0.3 * (trial % 3), 1.0 + 0.1 * trial);
    std::vector<double> x(1 + trial * 7);
    for (double& v : x) v = g(rng);
    const double ks = ks_statistic(x, 1.5);
    const double lv = levy_distance(x, 1.5);
    CHECK(lv >= 0.0);
    CHECK(lv <= ks);
    CHECK(ks <= 1.0);
  }
}

TEST_CASE("type-7 quantiles") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({5.0}, 0.9) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), InvalidArgument);
}

TEST_CASE("R = 1 report has one row and no covariance") {
  const CltReport rep = run_clt_experiment(toeplitz_model(32, 32, EntryLaw::real_gaussian), 1, 5, {.threads = 1});
  CHECK(rep.samples.rows() == 1);
  CHECK_FALSE(rep.empirical_cov.has_value());
  const auto j = rep.to_json();
  CHECK(j.at("empirical_cov_absent") == true);
  CHECK(j.contains("timing"));
}

TEST_CASE("report invariants and thread-count determinism") {
  const ModelConfig cfg = toeplitz_model(48, 40, EntryLaw::rademacher);
  const CltReport a = run_clt_experiment(cfg, 40, 123, {.threads = 1});
  const CltReport b = run_clt_experiment(cfg, 40, 123, {.threads = 4});
  CHECK(a.samples == b.samples);
  CHECK(a.lambda_S == b.lambda_S);
  REQUIRE(a.empirical_cov.has_value());
  CHECK(*a.empirical_cov == *b.empirical_cov);
  std::ostringstream sa, sb;
  a.write_samples_csv(sa);
  b.write_samples_csv(sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("rep,j,lambda_S,lambda_Gamma,Lambda\r\n", 0) == 0);

  const Eigen::MatrixXd& E = *a.empirical_cov;
  CHECK(E.isApprox(E.transpose()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  CHECK(a.theoretical_cov.isApprox(a.theoretical_cov.transpose()));
  CHECK(a.theoretical_cov.diagonal().minCoeff() >= 0.0);
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(a.ks(j) >= 0.0);
    CHECK(a.ks(j) <= 1.0);
    CHECK(a.levy(j) <= a.ks(j));
  }
  CHECK(a.failures == 0);
  CHECK(a.replications.size() == 40);

  const CltReport c = run_clt_experiment(cfg, 40, 124, {.threads = 1});
  CHECK(c.samples != a.samples);
}

TEST_CASE("degenerate theoretical variance leaves KS undefined") {
  ModelConfig cfg;
  cfg.N = 32;
  cfg.n = 32;
  cfg.Gamma.spikes = {1.0, 0.5, 0.25};
  cfg.law = EntryLaw::rademacher;
  const CltReport rep = run_clt_experiment(cfg, 5, 1, {.threads = 1});
  CHECK(rep.theoretical_cov(0, 0) == 0.0);
  CHECK(std::isnan(rep.ks(0)));
  CHECK(std::isnan(rep.levy(0)));
}

TEST_CASE("delocalised Toeplitz eigenvectors give a nearly diagonal sigma") {
  const ModelConfig cfg = toeplitz_model(64, 1024, EntryLaw::rademacher);
  const PreparedModel pm = prepare_model(cfg);
  const Eigen::MatrixXd S = theoretical_sigma(law_moments(cfg.law), pm.c, pm.U);
  const double linf = pm.U.cwiseAbs().maxCoeff();
  CHECK(std::abs(S(0, 1)) <= 2.0 * linf * linf + 1e-8);
}

TEST_CASE("convergence sweep: schema, rejection of Gamma = I and C restriction") {
  ModelConfig cfg = toeplitz_model(0, 0, EntryLaw::real_gaussian);
  cfg.m = 1;
  const std::pair<std::size_t, std::size_t> sizes[] = {{16, 16}, {32, 32}};
  const auto rows = convergence_sweep(cfg, sizes, 5, 9, 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].target == 1.0);
  CHECK(rows[0].q25 <= rows[0].median);
  CHECK(rows[0].median <= rows[0].q75);
  CHECK(rows[1].abs_error == doctest::Approx(std::abs(rows[1].median - 1.0)));
  std::ostringstream os;
  write_sweep_csv(os, rows);
  CHECK(os.str().rfind("N,n,j,median,q25,q75,target,abs_error\r\n", 0) == 0);

  ModelConfig identity;
  identity.Gamma.diagonal = Eigen::VectorXd::Ones(16);
  identity.m = 1;
  const std::pair<std::size_t, std::size_t> one[] = {{16, 16}};
  CHECK_THROWS_AS(convergence_sweep(identity, one, 5, 1, 1), InvalidArgument);

  ModelConfig withc = cfg;
  withc.C.diagonal = Eigen::VectorXd::Ones(16);
  CHECK_THROWS_AS(convergence_sweep(withc, sizes, 5, 1, 1), InvalidArgument);
}
