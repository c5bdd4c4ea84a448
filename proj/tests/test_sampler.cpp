#include <doctest.h>

#include <cmath>
#include <complex>

#include "lmrmt/errors.hpp"
#include "lmrmt/rmt_sampler.hpp"
#include "lmrmt/spectral_engine.hpp"

using namespace lmrmt;

namespace {

ModelConfig toeplitz_config(std::size_t N, std::size_t n, EntryLaw law, std::size_t m = 2) {
  ModelConfig cfg;
  cfg.N = N;
  cfg.n = n;
  cfg.Gamma.toeplitz = ToeplitzSpec(0.4, SlowlyVarying::constant(1.0), Route::decay);
  cfg.law = law;
  cfg.m = m;
  return cfg;
}

ModelConfig diagonal_config(Eigen::VectorXd c, Eigen::VectorXd gamma, std::size_t m = 1) {
  ModelConfig cfg;
  cfg.N = static_cast<std::size_t>(c.size());
  cfg.n = static_cast<std::size_t>(gamma.size());
  cfg.C.diagonal = std::move(c);
  cfg.Gamma.diagonal = std::move(gamma);
  cfg.m = m;
  return cfg;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("entry law table and names") {
  CHECK(law_moments(EntryLaw::real_gaussian).abs4 == 3.0);
  CHECK(law_moments(EntryLaw::complex_gaussian).sq == 0.0);
  CHECK(law_moments(EntryLaw::complex_gaussian).abs4 == 2.0);
  CHECK(law_moments(EntryLaw::rademacher).abs4 == 1.0);
  CHECK(law_moments(EntryLaw::uniform_scaled).abs4 == doctest::Approx(1.8));
  CHECK(law_moments(EntryLaw::complex_circular_rademacher).abs4 == 1.0);
  for (EntryLaw law : {EntryLaw::real_gaussian, EntryLaw::complex_gaussian, EntryLaw::rademacher,
                       EntryLaw::uniform_scaled, EntryLaw::complex_circular_rademacher}) {
    CHECK(entry_law_from_string(to_string(law)) == law);
  }
  CHECK_THROWS_AS(entry_law_from_string("cauchy"), InvalidArgument);
  CHECK_THROWS_AS(sample_Z_real(EntryLaw::complex_gaussian, 2, 2, {}), InvalidArgument);
}

TEST_CASE("empirical moments over 1e6 draws") {
  const RandomStream stream{42, 0};
  SUBCASE("real laws") {
    for (EntryLaw law : {EntryLaw::real_gaussian, EntryLaw::rademacher, EntryLaw::uniform_scaled}) {
      const Eigen::MatrixXd Z = sample_Z_real(law, 1000, 1000, stream);
      const Eigen::ArrayXd z = Z.reshaped().array();
      const double count = static_cast<double>(z.size());
      const double mean = z.mean();
      const double m2 = z.square().mean();
      const double m4 = z.square().square().mean();
      const double m8 = z.pow(8).mean();
      const double se4 = std::sqrt((m8 - m4 * m4) / count);
      CAPTURE(to_string(law));
      CHECK(std::abs(mean) <= 5.0 / std::sqrt(count));
      CHECK(m2 == doctest::Approx(1.0).epsilon(0.01));
      CHECK(std::abs(m4 - law_moments(law).abs4) <= std::max(3.0 * se4, 1e-12));
      if (law == EntryLaw::rademacher) CHECK((z.abs() == 1.0).all());
      if (law == EntryLaw::uniform_scaled) CHECK(z.abs().maxCoeff() <= std::sqrt(3.0));
    }
  }
  SUBCASE("complex laws") {
    for (EntryLaw law : {EntryLaw::complex_gaussian, EntryLaw::complex_circular_rademacher}) {
      const Eigen::MatrixXcd Z = sample_Z_complex(law, 1000, 1000, stream);
      const Eigen::ArrayXcd z = Z.reshaped().array();
      CAPTURE(to_string(law));
      CHECK(z.abs2().mean() == doctest::Approx(1.0).epsilon(0.01));
      CHECK(std::abs(z.square().mean()) <= 0.01);
      CHECK(z.abs2().square().mean() == doctest::Approx(law_moments(law).abs4).epsilon(0.02));
      if (law == EntryLaw::complex_circular_rademacher) {
        CHECK((z.real().abs() + z.imag().abs() == 1.0).all());
      }
    }
  }
}

TEST_CASE("sampling is a pure function of (seed, replication)") {
  const Eigen::MatrixXd a = sample_Z_real(EntryLaw::real_gaussian, 17, 9, {7, 3});
  const Eigen::MatrixXd b = sample_Z_real(EntryLaw::real_gaussian, 17, 9, {7, 3});
  const Eigen::MatrixXd c = sample_Z_real(EntryLaw::real_gaussian, 17, 9, {7, 4});
  const Eigen::MatrixXd d = sample_Z_real(EntryLaw::real_gaussian, 17, 9, {8, 3});
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != d);
  // Entry (i, k) depends only on its own counter, so a larger matrix with the
  // same N shares the leading columns.
  const Eigen::MatrixXd wide = sample_Z_real(EntryLaw::real_gaussian, 17, 12, {7, 3});
  CHECK(wide.leftCols(9) == a);
  const Eigen::MatrixXcd za = sample_Z_complex(EntryLaw::complex_gaussian, 5, 4, {1, 1});
  CHECK(za == sample_Z_complex(EntryLaw::complex_gaussian, 5, 4, {1, 1}));
  const Eigen::MatrixXcd zr = sample_Z_complex(EntryLaw::rademacher, 5, 4, {1, 1});
  CHECK(zr.imag().isZero(0.0));
}

TEST_CASE("assemble_S: hand-computed examples") {
  SUBCASE("C = diag(1, 4), Gamma = diag(1, 0), Z = I") {
    const PreparedModel pm = prepare_model(diagonal_config(Eigen::Vector2d(1.0, 4.0), Eigen::Vector2d(1.0, 0.0)));
    const Eigen::MatrixXd S = assemble_S(pm, Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2)));
    CHECK(S.isApprox(Eigen::Vector2d(0.5, 0.0).asDiagonal().toDenseMatrix()));
  }
  SUBCASE("C = I, Gamma = I, Z = I gives I / N") {
    // Gamma = I fails the gap validator, so the prepared model is built by hand.
    PreparedModel pm;
    pm.config.N = pm.config.n = 3;
    pm.c = pm.sqrt_c = Eigen::VectorXd::Ones(3);
    pm.t = Eigen::VectorXd::Ones(3);
    pm.gamma_diagonal = true;
    pm.gamma_sqrt_diag = Eigen::VectorXd::Ones(3);
    const Eigen::MatrixXd S = assemble_S(pm, Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3)));
    CHECK(S.isApprox(Eigen::MatrixXd::Identity(3, 3) / 3.0));
  }
}

TEST_CASE("assemble_S matches the direct dense formula") {
  for (auto [N, n] : {std::pair<std::size_t, std::size_t>{40, 30}, {20, 50}}) {
    ModelConfig cfg = toeplitz_config(N, n, EntryLaw::real_gaussian);
    Eigen::VectorXd c(N);
    for (std::size_t i = 0; i < N; ++i) c(static_cast<Eigen::Index>(i)) = 0.5 + 0.1 * static_cast<double>(i % 7);
    cfg.C.diagonal = c;
    const PreparedModel pm = prepare_model(cfg);
    const Eigen::MatrixXd Z = sample_Z_real(EntryLaw::real_gaussian, N, n, {1, 2});
    const Eigen::MatrixXd S = assemble_S(pm, Z);
    const Eigen::MatrixXd Gamma = build_toeplitz(*cfg.Gamma.toeplitz, n).dense();
    const Eigen::MatrixXd Ch = c.cwiseSqrt().asDiagonal();
    const Eigen::MatrixXd direct = Ch * Z * Gamma * Z.transpose() * Ch / static_cast<double>(N);
    CHECK((S - direct).cwiseAbs().maxCoeff() <= 1e-10 * direct.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("complex assembly is Hermitian and PSD") {
  const PreparedModel pm = prepare_model(toeplitz_config(48, 40, EntryLaw::complex_gaussian));
  const Eigen::MatrixXcd Z = sample_Z_complex(EntryLaw::complex_gaussian, 48, 40, {3, 0});
  const Eigen::MatrixXcd S = assemble_S(pm, Z);
  CHECK((S - S.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
  const Eigen::MatrixXcd Gamma = build_toeplitz(*pm.config.Gamma.toeplitz, 40).dense().cast<std::complex<double>>();
  const Eigen::MatrixXcd direct = Z * Gamma * Z.adjoint() / 48.0;
  CHECK((S - direct).cwiseAbs().maxCoeff() <= 1e-10 * direct.cwiseAbs().maxCoeff());
}

TEST_CASE("lambda_stats fixtures") {
  const std::size_t N = 6;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(4);
  gamma(0) = 1.0;
  const PreparedModel pm = prepare_model(diagonal_config(Eigen::VectorXd::Ones(N), gamma));
  const std::vector<double> theta = {1.0};
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, 4);
  Z(0, 0) = std::sqrt(static_cast<double>(N));
  const Eigen::MatrixXd S = assemble_S(pm, Z);
  const Eigen::VectorXd top = top_eigenvalues(S, 1);
  CHECK(top(0) == doctest::Approx(1.0));
  CHECK(std::abs(lambda_stats(pm, top, theta)(0)) <= 1e-14);

  const Eigen::VectorXd exact = Eigen::VectorXd::Constant(1, 1.7);
  const std::vector<double> theta2 = {1.7};
  CHECK(lambda_stats(pm, exact, theta2)(0) == 0.0);
  CHECK_THROWS_AS(lambda_stats(pm, Eigen::VectorXd(), theta2), InvalidArgument);
}

TEST_CASE("validator rejects Gamma = I, bad dimensions and bad C") {
  CHECK_THROWS_AS(prepare_model(diagonal_config(Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4))), InvalidArgument);
  CHECK_THROWS_AS(prepare_model(diagonal_config(Eigen::VectorXd::Ones(4), Eigen::Vector3d(1.0, 0.5, 0.2), 4)),
                  InvalidArgument);
  CHECK_THROWS_AS(prepare_model(diagonal_config(Eigen::Vector2d(-1.0, 1.0), Eigen::Vector3d(1.0, 0.5, 0.2))),
                  InvalidArgument);
  ModelConfig cfg = toeplitz_config(8, 8, EntryLaw::real_gaussian);
  cfg.C.diagonal = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(prepare_model(cfg), InvalidArgument);
}

TEST_CASE("spiked diagonal Gamma: spikes then a power tail") {
  ModelConfig cfg;
  cfg.N = 10;
  cfg.n = 6;
  cfg.Gamma.spikes = {1.0, 0.5, 0.25};
  const PreparedModel pm = prepare_model(cfg);
  CHECK(pm.t(0) == 1.0);
  CHECK(pm.t(2) == 0.25);
  CHECK(pm.t(3) == doctest::Approx(1.0 / 16.0));
  CHECK(pm.t(5) == doctest::Approx(1.0 / 36.0));
  CHECK(pm.gamma_diagonal);
  CHECK(pm.U.col(0).cwiseAbs().maxCoeff() == 1.0);
}

TEST_CASE("one Gaussian replication at N = n = 256 is finite and moderate") {
  const PreparedModel pm = prepare_model(toeplitz_config(256, 256, EntryLaw::real_gaussian));
  std::vector<double> th(2);
  for (std::size_t j = 0; j < 2; ++j) th[j] = solve_theta(j + 1, pm.population()).theta;
  const ReplicationSample r = run_replication(pm, th, {9, 0});
  CHECK(r.Lambda.allFinite());
  CHECK(r.Lambda.cwiseAbs().maxCoeff() <= 10.0);
  CHECK(r.lambda_S(0) >= r.lambda_S(1));
}

TEST_CASE("model config JSON round trip") {
  ModelConfig cfg = toeplitz_config(64, 32, EntryLaw::rademacher, 3);
  cfg.C.diagonal = Eigen::VectorXd::LinSpaced(64, 0.5, 1.5);
  const ModelConfig back = ModelConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.law == EntryLaw::rademacher);
  CHECK(back.m == 3);

  ModelConfig spiked;
  spiked.N = 8;
  spiked.n = 8;
  spiked.Gamma.spikes = {2.0, 1.0};
  spiked.Gamma.tail_exponent = 3.0;
  CHECK(ModelConfig::from_json(spiked.to_json()).to_json() == spiked.to_json());
  CHECK_THROWS_AS(ModelConfig::from_json(nlohmann::json{{"N", 4}, {"n", 4}, {"C", "identity"}, {"Gamma", {}}}),
                  InvalidArgument);
}
