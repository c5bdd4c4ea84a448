#include "lmrmt/rmt_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lmrmt/errors.hpp"
#include "lmrmt/report_io.hpp"
#include "lmrmt/spectral_engine.hpp"

namespace lmrmt {

EntryMoments law_moments(EntryLaw law) {
  switch (law) {
    case EntryLaw::real_gaussian:
      return {1.0, 1.0, 3.0, true, true};
    case EntryLaw::complex_gaussian:
      return {1.0, 0.0, 2.0, true, true};
    case EntryLaw::rademacher:
      return {1.0, 1.0, 1.0, true, true};
    case EntryLaw::uniform_scaled:
      return {1.0, 1.0, 9.0 / 5.0, true, true};
    case EntryLaw::complex_circular_rademacher:
      return {1.0, 0.0, 1.0, true, true};
  }
  throw InvalidArgument("unknown entry law");
}

bool is_complex(EntryLaw law) {
  return law == EntryLaw::complex_gaussian || law == EntryLaw::complex_circular_rademacher;
}

std::string to_string(EntryLaw law) {
  switch (law) {
    case EntryLaw::real_gaussian:
      return "real_gaussian";
    case EntryLaw::complex_gaussian:
      return "complex_gaussian";
    case EntryLaw::rademacher:
      return "rademacher";
    case EntryLaw::uniform_scaled:
      return "uniform_scaled";
    case EntryLaw::complex_circular_rademacher:
      return "complex_circular_rademacher";
  }
  return "unknown";
}

EntryLaw entry_law_from_string(const std::string& name) {
  for (EntryLaw law : {EntryLaw::real_gaussian, EntryLaw::complex_gaussian, EntryLaw::rademacher,
                       EntryLaw::uniform_scaled, EntryLaw::complex_circular_rademacher}) {
    if (to_string(law) == name) return law;
  }
  throw InvalidArgument("unknown entry law '" + name +
                        "' (expected real_gaussian, complex_gaussian, rademacher, uniform_scaled or "
                        "complex_circular_rademacher)");
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint64_t M0 = 0xD2511F53u;
  constexpr std::uint64_t M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u;
  constexpr std::uint32_t W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    const std::uint64_t p0 = M0 * ctr[0];
    const std::uint64_t p1 = M1 * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct EntryDraw {
  double u1;  // in (0, 1]
  double u2;
  std::uint32_t bits;
};

EntryDraw draw(std::uint64_t index, RandomStream s) {
  const auto out = philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                               static_cast<std::uint32_t>(s.replication),
                               static_cast<std::uint32_t>(s.replication >> 32)},
                              {static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32)});
  const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  return {static_cast<double>((a >> 11) + 1) * scale, static_cast<double>((b >> 11) + 1) * scale, out[3]};
}

std::complex<double> sample_entry(EntryLaw law, std::uint64_t index, RandomStream s) {
  const EntryDraw d = draw(index, s);
  switch (law) {
    case EntryLaw::real_gaussian:
      return {std::sqrt(-2.0 * std::log(d.u1)) * std::cos(kTwoPi * d.u2), 0.0};
    case EntryLaw::complex_gaussian: {
      const double r = std::sqrt(-std::log(d.u1));  // sqrt(-2 ln u) / sqrt(2)
      return {r * std::cos(kTwoPi * d.u2), r * std::sin(kTwoPi * d.u2)};
    }
    case EntryLaw::rademacher:
      return {(d.bits & 1u) ? 1.0 : -1.0, 0.0};
    case EntryLaw::uniform_scaled:
      return {std::sqrt(3.0) * (2.0 * d.u1 - 1.0), 0.0};
    case EntryLaw::complex_circular_rademacher:
      switch (d.bits & 3u) {
        case 0:
          return {1.0, 0.0};
        case 1:
          return {0.0, 1.0};
        case 2:
          return {-1.0, 0.0};
        default:
          return {0.0, -1.0};
      }
  }
  return {};
}

void check_dims(std::size_t N, std::size_t n) {
  if (N == 0 || n == 0) throw InvalidArgument("matrix dimensions must be positive");
}

}  // namespace

Eigen::MatrixXd sample_Z_real(EntryLaw law, std::size_t N, std::size_t n, RandomStream stream) {
  check_dims(N, n);
  if (is_complex(law)) throw InvalidArgument("law " + to_string(law) + " is complex");
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sample_entry(law, i + N * k, stream).real();
    }
  }
  return Z;
}

Eigen::MatrixXcd sample_Z_complex(EntryLaw law, std::size_t N, std::size_t n, RandomStream stream) {
  check_dims(N, n);
  Eigen::MatrixXcd Z(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sample_entry(law, i + N * k, stream);
    }
  }
  return Z;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["N"] = N;
  j["n"] = n;
  if (C.diagonal) {
    j["C"] = {{"diagonal", lmrmt::to_json(*C.diagonal)}};
  } else {
    j["C"] = "identity";
  }
  nlohmann::json g;
  if (Gamma.toeplitz) {
    g["toeplitz"] = Gamma.toeplitz->to_json();
  } else if (Gamma.diagonal) {
    g["diagonal"] = lmrmt::to_json(*Gamma.diagonal);
  } else {
    g["spikes"] = Gamma.spikes;
    g["tail_exponent"] = Gamma.tail_exponent;
  }
  j["Gamma"] = g;
  j["law"] = to_string(law);
  j["m"] = m;
  j["max_gap_ratio"] = max_gap_ratio;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig cfg;
    cfg.N = j.at("N").get<std::size_t>();
    cfg.n = j.at("n").get<std::size_t>();
    if (j.contains("C")) {
      const auto& c = j.at("C");
      if (c.is_string()) {
        if (c.get<std::string>() != "identity") throw InvalidArgument("C must be \"identity\" or {\"diagonal\": [...]}");
      } else {
        cfg.C.diagonal = vector_from_json(c.at("diagonal"));
      }
    }
    const auto& g = j.at("Gamma");
    if (g.contains("toeplitz")) {
      cfg.Gamma.toeplitz = ToeplitzSpec::from_json(g.at("toeplitz"));
    } else if (g.contains("diagonal")) {
      cfg.Gamma.diagonal = vector_from_json(g.at("diagonal"));
    } else if (g.contains("spikes")) {
      cfg.Gamma.spikes = g.at("spikes").get<std::vector<double>>();
      cfg.Gamma.tail_exponent = g.value("tail_exponent", 2.0);
    } else {
      throw InvalidArgument("Gamma must contain one of toeplitz, diagonal, spikes");
    }
    cfg.law = entry_law_from_string(j.value("law", std::string("real_gaussian")));
    cfg.m = j.value("m", std::size_t{1});
    cfg.max_gap_ratio = j.value("max_gap_ratio", 0.999);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model config: ") + e.what());
  }
}

PreparedModel prepare_model(const ModelConfig& config) {
  if (config.N == 0 || config.n == 0) throw InvalidArgument("N and n must be positive");
  if (config.m == 0 || config.m > config.n) throw InvalidArgument("m must lie in [1, n]");
  if (!(config.max_gap_ratio > 0.0 && config.max_gap_ratio < 1.0)) {
    throw InvalidArgument("max_gap_ratio must lie in (0, 1)");
  }
  const auto N = static_cast<Eigen::Index>(config.N);
  const auto n = static_cast<Eigen::Index>(config.n);

  PreparedModel pm;
  pm.config = config;
  if (config.C.diagonal) {
    const Eigen::VectorXd& c = *config.C.diagonal;
    if (c.size() != N) throw InvalidArgument("C diagonal has length " + std::to_string(c.size()) + ", expected N");
    if (!c.allFinite() || (c.array() < 0.0).any()) throw InvalidArgument("C spectrum must be finite and nonnegative");
    if (!(c.array() > 0.0).any()) throw InvalidArgument("C spectrum must not vanish identically");
    pm.c = c;
  } else {
    pm.c = Eigen::VectorXd::Ones(N);
  }
  pm.sqrt_c = pm.c.cwiseSqrt();

  Eigen::VectorXd raw;
  if (config.Gamma.toeplitz) {
    const Eigen::MatrixXd G = build_toeplitz(*config.Gamma.toeplitz, config.n).dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of Gamma failed");
    const Eigen::VectorXd asc = es.eigenvalues();
    const Eigen::MatrixXd V = es.eigenvectors().rowwise().reverse();
    Eigen::VectorXd t = asc.reverse();
    const double floor = -1e-10 * std::abs(t(0));
    if (t.minCoeff() < floor) {
      std::ostringstream msg;
      msg << "Gamma has negative eigenvalues down to " << t.minCoeff() << "; clamped at 0";
      pm.warnings.push_back(msg.str());
    }
    t = t.cwiseMax(0.0);
    pm.t = t;
    pm.U = V.leftCols(static_cast<Eigen::Index>(config.m));
    pm.gamma_sqrt = V * t.cwiseSqrt().asDiagonal() * V.transpose();
    pm.gamma_diagonal = false;
  } else {
    if (config.Gamma.diagonal) {
      raw = *config.Gamma.diagonal;
      if (raw.size() != n) throw InvalidArgument("Gamma diagonal has length " + std::to_string(raw.size()) + ", expected n");
    } else {
      const auto& spikes = config.Gamma.spikes;
      if (spikes.empty()) throw InvalidArgument("Gamma spike list is empty");
      if (static_cast<Eigen::Index>(spikes.size()) > n) throw InvalidArgument("more spikes than n");
      raw.resize(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        raw(k) = k < static_cast<Eigen::Index>(spikes.size())
                     ? spikes[static_cast<std::size_t>(k)]
                     : std::pow(static_cast<double>(k + 1), -config.Gamma.tail_exponent);
      }
    }
    if (!raw.allFinite()) throw InvalidArgument("Gamma spectrum must be finite");
    if ((raw.array() < 0.0).any()) {
      pm.warnings.push_back("Gamma diagonal has negative entries; clamped at 0");
      raw = raw.cwiseMax(0.0);
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return raw(a) > raw(b); });
    pm.t.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) pm.t(k) = raw(order[static_cast<std::size_t>(k)]);
    pm.U = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(config.m));
    for (std::size_t j = 0; j < config.m; ++j) pm.U(order[j], static_cast<Eigen::Index>(j)) = 1.0;
    pm.gamma_sqrt_diag = raw.cwiseSqrt();
    pm.gamma_diagonal = true;
  }

  if (!(pm.t(0) > 0.0)) throw InvalidArgument("Gamma must not vanish identically");
  for (std::size_t j = 0; j < config.m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double next = jj + 1 < n ? pm.t(jj + 1) : 0.0;
    if (!(pm.t(jj) > 0.0) || next / pm.t(jj) > config.max_gap_ratio) {
      std::ostringstream msg;
      msg << "tracked eigenvalue " << j + 1 << " of Gamma is not separated: lambda_" << j + 2 << " / lambda_" << j + 1
          << " = " << (pm.t(jj) > 0.0 ? next / pm.t(jj) : 1.0) << " exceeds " << config.max_gap_ratio;
      throw InvalidArgument(msg.str());
    }
  }
  return pm;
}

namespace {

template <class Scalar>
MatrixX<Scalar> form_B(const PreparedModel& model, const MatrixX<Scalar>& Z) {
  if (Z.rows() != model.c.size() || Z.cols() != model.t.size()) throw InvalidArgument("Z has the wrong shape");
  if (model.gamma_diagonal) {
    return model.sqrt_c.asDiagonal() * Z * model.gamma_sqrt_diag.asDiagonal();
  }
  return model.sqrt_c.asDiagonal() * (Z * model.gamma_sqrt.template cast<Scalar>());
}

// (B B* / N), or (B* B / N) when it is smaller; same nonzero spectrum.
template <class Scalar>
MatrixX<Scalar> gram(const MatrixX<Scalar>& B, bool outer, double N) {
  const Eigen::Index d = outer ? B.rows() : B.cols();
  MatrixX<Scalar> S = MatrixX<Scalar>::Zero(d, d);
  if (outer) {
    S.template selfadjointView<Eigen::Lower>().rankUpdate(B, 1.0 / N);
  } else {
    S.template selfadjointView<Eigen::Lower>().rankUpdate(B.adjoint(), 1.0 / N);
  }
  S.template triangularView<Eigen::StrictlyUpper>() = S.adjoint();
  for (Eigen::Index i = 0; i < d; ++i) S(i, i) = std::real(S(i, i));
  return S;
}

template <class Scalar>
ReplicationSample finish(const PreparedModel& model, const MatrixX<Scalar>& Z, std::span<const double> theta) {
  const MatrixX<Scalar> B = form_B(model, Z);
  const bool outer = B.rows() <= B.cols();
  const MatrixX<Scalar> S = gram<Scalar>(B, outer, static_cast<double>(model.config.N));
  ReplicationSample out;
  out.lambda_S = top_eigenvalues<Scalar>(S, model.config.m);
  out.Lambda = lambda_stats(model, out.lambda_S, theta);
  return out;
}

}  // namespace

Eigen::MatrixXd assemble_S(const PreparedModel& model, const Eigen::MatrixXd& Z) {
  return gram<double>(form_B<double>(model, Z), true, static_cast<double>(model.config.N));
}

Eigen::MatrixXcd assemble_S(const PreparedModel& model, const Eigen::MatrixXcd& Z) {
  return gram<std::complex<double>>(form_B<std::complex<double>>(model, Z), true, static_cast<double>(model.config.N));
}

Eigen::VectorXd lambda_stats(const PreparedModel& model, const Eigen::VectorXd& top_eigs_S,
                             std::span<const double> theta) {
  const std::size_t m = model.config.m;
  if (static_cast<std::size_t>(top_eigs_S.size()) < m) throw InvalidArgument("need the top m eigenvalues of S");
  if (theta.size() < m) throw InvalidArgument("need one spike location per tracked eigenvalue");
  const double rootN = std::sqrt(static_cast<double>(model.config.N));
  Eigen::VectorXd out(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out(jj) = rootN * (top_eigs_S(jj) / model.t(jj) - theta[j]);
  }
  return out;
}

ReplicationSample run_replication(const PreparedModel& model, std::span<const double> theta, RandomStream stream) {
  const std::size_t N = model.config.N;
  const std::size_t n = model.config.n;
  if (is_complex(model.config.law)) {
    return finish<std::complex<double>>(model, sample_Z_complex(model.config.law, N, n, stream), theta);
  }
  return finish<double>(model, sample_Z_real(model.config.law, N, n, stream), theta);
}

}  // namespace lmrmt
