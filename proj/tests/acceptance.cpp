// Acceptance checks #1-#14. Prints one PASS/FAIL line per criterion.
// Exit status is 0 when every failure is listed in --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmrmt/clt_harness.hpp"
#include "lmrmt/covariance_models.hpp"
#include "lmrmt/det_equiv.hpp"
#include "lmrmt/kernel_operator.hpp"
#include "lmrmt/report_io.hpp"
#include "lmrmt/spike_predictor.hpp"

using namespace lmrmt;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kBoundaryTol = 0.05;
constexpr double kGapTol = 1e-6;
constexpr double kDecayRouteRelTol = 0.02;
constexpr double kDensityRouteRelTol = 0.03;
constexpr double kNormalizationTol = 1e-10;
constexpr double kDelocSlack = 0.2;
constexpr double kThetaResidualTol = 1e-10;
constexpr double kSeriesTol = 1e-6;
constexpr double kClosedFormTol = 1e-12;
constexpr double kDetEquivTol = 1e-6;
constexpr double kKsTol = 0.05;
constexpr double kRealVarLo = 1.6, kRealVarHi = 2.4;
constexpr double kComplexVarLo = 0.8, kComplexVarHi = 1.2;
constexpr double kCorrTol = 0.1;
constexpr double kDegenerateVarTol = 0.3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> check;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct Settings {
  std::size_t threads = 0;
  std::uint64_t seed = 20240601;
  fs::path report_dir;
  std::set<int> expect_fail;
  std::set<int> only;
};

void save(const Settings& s, const std::string& name, const std::string& content) {
  if (s.report_dir.empty()) return;
  fs::create_directories(s.report_dir);
  atomic_write(s.report_dir / name, content);
}

template <class Fn>
std::string capture(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

// Shared state so later criteria reuse earlier work.
struct Shared {
  std::vector<KernelEigenSystem> kernels;  // rho = 0.25, 0.5, 0.75 at grid 2048
  std::vector<ToeplitzKernelRow> decay_rows;
  std::optional<KernelEigenSystem> kernel_half_fine;  // rho = 0.5 at grid 4096
  double kernel_half_lambda1 = 0.0;
  std::string real_samples_csv;
};

const std::size_t kLadder[] = {512, 1024, 2048, 4096};

const KernelEigenSystem& half_kernel(Shared& sh) {
  if (!sh.kernel_half_fine) {
    sh.kernel_half_fine = kernel_eigs(0.5, 4096, 3);
    const KernelEigenSystem coarse = kernel_eigs(0.5, 2048, 1);
    // Second-order grid convergence; the extrapolated value is the oracle.
    sh.kernel_half_lambda1 = richardson_extrapolate(coarse.values(0), sh.kernel_half_fine->values(0), 2.0);
  }
  return *sh.kernel_half_fine;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

ModelConfig clt_config(EntryLaw law) {
  ModelConfig cfg;
  cfg.N = 256;
  cfg.n = 256;
  cfg.Gamma.toeplitz = ToeplitzSpec(0.4, SlowlyVarying::constant(1.0), Route::decay);
  cfg.law = law;
  cfg.m = 2;
  return cfg;
}

struct RandomModel {
  Eigen::VectorXd c, t;
};

RandomModel random_model(std::mt19937_64& rng, bool gapped) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int N = std::uniform_int_distribution<int>(8, 512)(rng);
  const int n_max = gapped ? std::min(64, N / 2) : 64;
  const int n = std::uniform_int_distribution<int>(4, n_max)(rng);
  RandomModel m;
  m.c.resize(N);
  for (int i = 0; i < N; ++i) m.c(i) = 0.2 + 2.8 * u(rng);
  m.t.resize(n);
  const double base = 0.3 + 0.5 * u(rng);
  for (int k = 0; k < n; ++k) m.t(k) = std::pow(base, k) * (1.0 + 0.01 * u(rng));
  std::sort(m.t.begin(), m.t.end(), std::greater<>());
  return m;
}

Outcome criterion_1(const Settings&, Shared& sh) {
  double worst = 0.0;
  std::string per_rho;
  for (const auto& sys : sh.kernels) {
    const double dev = boundary_check(sys).head(5).maxCoeff();
    worst = std::max(worst, dev);
    per_rho += " rho=" + fmt(sys.rho) + ":" + fmt(dev);
  }
  return {worst <= kBoundaryTol, "max | |f_j(1)| - sqrt(1-rho) | over j<=5 =" + per_rho + " (tol " + fmt(kBoundaryTol) + ")"};
}

Outcome criterion_2(const Settings&, Shared& sh) {
  double min_gap = 1.0;
  bool positive = true;
  for (const auto& sys : sh.kernels) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      positive = positive && sys.values(j) > 0.0;
      if (j > 0) min_gap = std::min(min_gap, (sys.values(j - 1) - sys.values(j)) / sys.values(j - 1));
    }
  }
  return {positive && min_gap >= kGapTol, "smallest relative gap among top 8 = " + fmt(min_gap) + " (tol " + fmt(kGapTol) + ")"};
}

Outcome criterion_3(const Settings& s, Shared& sh) {
  const KernelEigenSystem& K = half_kernel(sh);
  const ToeplitzSpec spec(0.5, SlowlyVarying::constant(1.0), Route::decay);
  sh.decay_rows = toeplitz_vs_kernel_report(spec, kLadder, 3, K, s.threads);
  save(s, "toeplitz_decay.csv", capture([&](std::ostream& os) { write_report_csv(os, sh.decay_rows); }));
  std::vector<double> ratios;
  for (const auto& r : sh.decay_rows)
    if (r.j == 1) ratios.push_back(r.ratio);
  std::vector<double> diffs;
  for (std::size_t i = 1; i < ratios.size(); ++i) diffs.push_back(std::abs(ratios[i] - ratios[i - 1]));
  const double rel = std::abs(ratios.back() - sh.kernel_half_lambda1) / sh.kernel_half_lambda1;
  const bool shrinking = strictly_decreasing(diffs);
  return {shrinking && rel <= kDecayRouteRelTol,
          "lambda_1(T_n)/sqrt(n) = " + join(ratios) + "; successive diffs " + join(diffs) +
              (shrinking ? " shrinking" : " NOT shrinking") + "; final vs lambda_1(K) = " + fmt(sh.kernel_half_lambda1) +
              " rel err " + fmt(rel) + " (tol " + fmt(kDecayRouteRelTol) + ")"};
}

Outcome criterion_4(const Settings& s, Shared& sh) {
  const KernelEigenSystem& K = half_kernel(sh);
  DensityQuadrature unit;
  unit.normalization = FourierNormalization::unit;
  const ToeplitzSpec spec(0.5, SlowlyVarying::constant(1.0), Route::density, unit);
  const auto rows = toeplitz_vs_kernel_report(spec, kLadder, 1, K, s.threads);
  save(s, "toeplitz_density.csv", capture([&](std::ostream& os) { write_report_csv(os, rows); }));
  const double target = std::sqrt(2.0 * std::numbers::pi) * sh.kernel_half_lambda1;
  const double final_value = rows.back().lambda / std::sqrt(static_cast<double>(rows.back().n));
  const double rel = std::abs(final_value - target) / target;

  // The default convention differs by exactly 1 / (2 pi).
  const std::size_t probe[] = {512};
  const auto def = toeplitz_vs_kernel_report(ToeplitzSpec(0.5, SlowlyVarying::constant(1.0), Route::density), probe, 1, K, 1);
  const double conv = std::abs(def[0].lambda * 2.0 * std::numbers::pi / rows[0].lambda - 1.0);
  return {rel <= kDensityRouteRelTol && conv <= kNormalizationTol,
          "unit normalisation: lambda_1(T_4096)/sqrt(n) = " + fmt(final_value) + " vs sqrt(2 pi) lambda_1(K) = " +
              fmt(target) + " rel err " + fmt(rel) + " (tol " + fmt(kDensityRouteRelTol) +
              "); default/unit * 2 pi - 1 = " + fmt(conv)};
}

Outcome criterion_5(const Settings& s, Shared&) {
  const std::size_t sizes[] = {256, 512, 1024, 2048};
  const auto rows = compare_toeplitz_pair(0.5, SlowlyVarying::log_growth(), sizes, {}, s.threads);
  save(s, "toeplitz_pair.csv", capture([&](std::ostream& os) { write_pair_csv(os, rows); }));
  std::vector<double> norms, dists;
  for (const auto& r : rows) {
    norms.push_back(r.norm_difference);
    dists.push_back(r.eigvec_distances.at(0));
  }
  const bool halved = norms.back() < 0.5 * norms.front();
  const bool evec = strictly_decreasing(dists);
  return {halved && evec, "norm difference " + join(norms) + " (final/initial " + fmt(norms.back() / norms.front()) +
                              ", need < 0.5); ||u_1 - u'_1|| " + join(dists) + (evec ? " decreasing" : " NOT decreasing")};
}

Outcome criterion_6(const Settings&, Shared& sh) {
  const KernelEigenSystem& K = half_kernel(sh);
  std::vector<double> sup;
  double deloc = 0.0;
  for (const auto& r : sh.decay_rows) {
    if (r.j != 1) continue;
    sup.push_back(r.sup_dev);
    deloc = r.deloc;
  }
  // max |f_1| on [0, 1]: midpoint samples plus both end points.
  const double fmax = std::max({K.functions.col(0).cwiseAbs().maxCoeff(), std::abs(K.boundary_values(0)),
                               std::abs(K.left_boundary_values(0))});
  const bool dec = strictly_decreasing(sup);
  const bool bounded = deloc <= fmax + kDelocSlack;
  return {dec && bounded, "sup_k |sqrt(n) u_1k - f_1(k/n)| = " + join(sup) + (dec ? " decreasing" : " NOT decreasing") +
                              "; sqrt(n)||u_1||_inf at 4096 = " + fmt(deloc) + " vs max|f_1| + " + fmt(kDelocSlack) +
                              " = " + fmt(fmax + kDelocSlack)};
}

Outcome criterion_7(const Settings& s, Shared&) {
  const std::size_t sizes[] = {256, 512, 1024};
  const auto a = moment_decay_table(ToeplitzSpec(0.4, SlowlyVarying::constant(1.0), Route::decay), sizes);
  const auto b = moment_decay_table(ToeplitzSpec(0.6, SlowlyVarying::constant(1.0), Route::decay), sizes);
  auto table = [](const std::vector<MomentDecayRow>& rows) {
    return capture([&](std::ostream& os) {
      CsvWriter csv(os);
      csv.row({"n", "lambda1", "first_moment_stat", "second_moment_stat"});
      for (const auto& r : rows) csv.values(r.n, r.lambda1, r.first_moment_stat, r.second_moment_stat);
    });
  };
  save(s, "moments_rho04.csv", table(a));
  save(s, "moments_rho06.csv", table(b));
  std::vector<double> first, second;
  for (const auto& r : a) first.push_back(r.first_moment_stat);
  for (const auto& r : b) second.push_back(r.second_moment_stat);
  const bool ok = strictly_decreasing(first) && strictly_decreasing(second);
  return {ok, "rho=0.4 sqrt(n) tr T~/n = " + join(first) + "; rho=0.6 sqrt(n) tr T~^2/n = " + join(second)};
}

Outcome criterion_8(const Settings&, Shared&) {
  std::mt19937_64 rng(8);
  double worst_G = 0.0, worst_series = 0.0;
  int in_region = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RandomModel rm = random_model(rng, false);
    const PopulationModel model(rm.c, rm.t);
    const SpikePrediction p = predict_spike(1, model, 10, false);
    worst_G = std::max(worst_G, p.G_residual);
    if (p.in_series_region) {
      ++in_region;
      worst_series = std::max(worst_series, std::abs(p.theta_root - p.theta_series));
    }
  }
  // C = I closed form on a Toeplitz spectrum.
  const auto T = build_toeplitz(ToeplitzSpec(0.4, SlowlyVarying::constant(1.0), Route::decay), 128);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T.dense(), Eigen::EigenvaluesOnly);
  const PopulationModel identity(Eigen::VectorXd::Ones(128), es.eigenvalues().reverse());
  double worst_closed = 0.0;
  for (std::size_t j = 1; j <= 3; ++j) {
    const ThetaSolution sol = solve_theta(j, identity);
    worst_closed = std::max(worst_closed, std::abs(sol.theta - (1.0 + sol.z)) / (1.0 + sol.z));
  }
  const bool ok = worst_G <= kThetaResidualTol && worst_series <= kSeriesTol && worst_closed <= kClosedFormTol &&
                  in_region > 0;
  return {ok, "max |G - 1| = " + fmt(worst_G) + " (tol " + fmt(kThetaResidualTol) + "); max |root - series| = " +
                  fmt(worst_series) + " over " + std::to_string(in_region) + " models in region (tol " + fmt(kSeriesTol) +
                  "); C=I relative error " + fmt(worst_closed)};
}

Outcome criterion_9(const Settings&, Shared&) {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const RandomModel rm = random_model(rng, true);
    const SpikePrediction p = predict_spike(1, PopulationModel(rm.c, rm.t), 10, true);
    worst = std::max(worst, p.det_equiv_residual);
  }
  return {worst <= kDetEquivTol, "max |g_C(theta_1) - 1| over 20 models = " + fmt(worst) + " (tol " + fmt(kDetEquivTol) + ")"};
}

struct CltSummary {
  double ks_max = 0.0;
  double var_lo = 0.0, var_hi = 0.0;
  double corr = 0.0;
  std::string text;
};

CltSummary summarise(const CltReport& r) {
  CltSummary s;
  s.ks_max = r.ks.maxCoeff();
  const Eigen::VectorXd var = r.empirical_cov->diagonal();
  s.var_lo = var.minCoeff();
  s.var_hi = var.maxCoeff();
  s.corr = r.max_offdiag_corr;
  s.text = "KS " + fmt(r.ks(0)) + " " + fmt(r.ks(1)) + "; variances " + fmt(var(0)) + " " + fmt(var(1)) + " (theory " +
           fmt(r.theoretical_cov(0, 0)) + "); means " + fmt(r.empirical_mean(0)) + " " + fmt(r.empirical_mean(1)) +
           "; max |corr| " + fmt(r.max_offdiag_corr) + "; " + fmt(r.seconds_per_replication * 1e3) + " ms/rep";
  return s;
}

Outcome criterion_10(const Settings& s, Shared& sh) {
  const CltReport r = run_clt_experiment(clt_config(EntryLaw::real_gaussian), 2000, s.seed, {.threads = 1});
  sh.real_samples_csv = capture([&](std::ostream& os) { r.write_samples_csv(os); });
  save(s, "clt_real.json", r.to_json().dump(2) + "\n");
  save(s, "clt_real_samples.csv", sh.real_samples_csv);
  const CltSummary c = summarise(r);
  const bool ok = c.ks_max <= kKsTol && c.var_lo >= kRealVarLo && c.var_hi <= kRealVarHi && c.corr <= kCorrTol;
  return {ok, c.text};
}

Outcome criterion_11(const Settings& s, Shared&) {
  const CltReport r = run_clt_experiment(clt_config(EntryLaw::complex_gaussian), 2000, s.seed + 1, {.threads = s.threads});
  save(s, "clt_complex.json", r.to_json().dump(2) + "\n");
  save(s, "clt_complex_samples.csv", capture([&](std::ostream& os) { r.write_samples_csv(os); }));
  const CltSummary c = summarise(r);
  const bool ok = c.ks_max <= kKsTol && c.var_lo >= kComplexVarLo && c.var_hi <= kComplexVarHi;
  return {ok, c.text};
}

Outcome criterion_12(const Settings& s, Shared&) {
  ModelConfig diag;
  diag.N = 256;
  diag.n = 256;
  diag.Gamma.spikes = {1.0, 0.5, 0.25};
  diag.law = EntryLaw::rademacher;
  diag.m = 1;
  const CltReport a = run_clt_experiment(diag, 1000, s.seed + 2, {.threads = s.threads});
  ModelConfig toep = clt_config(EntryLaw::rademacher);
  toep.m = 1;
  const CltReport b = run_clt_experiment(toep, 1000, s.seed + 3, {.threads = s.threads});
  save(s, "clt_rademacher_diagonal.json", a.to_json().dump(2) + "\n");
  save(s, "clt_rademacher_toeplitz.json", b.to_json().dump(2) + "\n");
  const double va = (*a.empirical_cov)(0, 0);
  const double vb = (*b.empirical_cov)(0, 0);
  const bool ok = va <= kDegenerateVarTol && vb >= kRealVarLo && vb <= kRealVarHi;
  return {ok, "(a) diagonal Gamma var(Lambda_1) = " + fmt(va) + " (tol " + fmt(kDegenerateVarTol) +
                  "); (b) Toeplitz Gamma var(Lambda_1) = " + fmt(vb) + " (range [" + fmt(kRealVarLo) + ", " +
                  fmt(kRealVarHi) + "])"};
}

Outcome criterion_13(const Settings& s, Shared&) {
  ModelConfig cfg = clt_config(EntryLaw::real_gaussian);
  cfg.m = 1;
  const std::pair<std::size_t, std::size_t> sizes[] = {{64, 64}, {128, 128}, {256, 256}, {512, 512}};
  const auto rows = convergence_sweep(cfg, sizes, 50, s.seed + 4, s.threads);
  save(s, "convergence_sweep.csv", capture([&](std::ostream& os) { write_sweep_csv(os, rows); }));
  std::vector<double> err, med;
  for (const auto& r : rows) {
    err.push_back(r.abs_error);
    med.push_back(r.median);
  }
  return {strictly_decreasing(err), "median lambda_1(S)/lambda_1(Gamma) = " + join(med) + "; |median - 1| = " + join(err)};
}

Outcome criterion_14(const Settings& s, Shared& sh) {
  if (sh.real_samples_csv.empty()) {
    const CltReport r = run_clt_experiment(clt_config(EntryLaw::real_gaussian), 2000, s.seed, {.threads = 1});
    sh.real_samples_csv = capture([&](std::ostream& os) { r.write_samples_csv(os); });
  }
  const CltReport r8 = run_clt_experiment(clt_config(EntryLaw::real_gaussian), 2000, s.seed, {.threads = 8});
  const std::string csv8 = capture([&](std::ostream& os) { r8.write_samples_csv(os); });
  const bool same = csv8 == sh.real_samples_csv;
  return {same, "samples CSV with 1 vs 8 threads: " + std::string(same ? "identical" : "DIFFERENT") + " (" +
                    std::to_string(csv8.size()) + " bytes, hash " + hex64(fnv1a64(csv8)) + ")"};
}

std::set<int> parse_ids(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Settings settings;
  std::string expect, only;
  std::string report_dir;
  app.add_option("--threads", settings.threads, "Worker cap (0 = all cores)");
  app.add_option("--seed", settings.seed, "Master seed for the Monte Carlo criteria")->capture_default_str();
  app.add_option("--report-dir", report_dir, "Write CSV/JSON reports here");
  app.add_option("--expect-fail", expect, "Comma-separated criteria known to fail");
  app.add_option("--only", only, "Comma-separated subset of criteria to run");
  CLI11_PARSE(app, argc, argv);
  settings.report_dir = report_dir;
  settings.expect_fail = parse_ids(expect);
  settings.only = parse_ids(only);

  Shared shared;
  auto need_kernels = [&] {
    if (shared.kernels.empty()) {
      for (double rho : {0.25, 0.5, 0.75}) shared.kernels.push_back(kernel_eigs(rho, 2048, 8));
    }
  };

  const std::vector<Criterion> criteria = {
      {1, "kernel boundary law", [&] { need_kernels(); return criterion_1(settings, shared); }},
      {2, "kernel eigenvalue gaps", [&] { need_kernels(); return criterion_2(settings, shared); }},
      {3, "Toeplitz asymptotics, decay route", [&] { return criterion_3(settings, shared); }},
      {4, "Toeplitz asymptotics, density route", [&] { return criterion_4(settings, shared); }},
      {5, "slowly varying factor removal", [&] { return criterion_5(settings, shared); }},
      {6, "eigenvector delocalisation",
       [&] {
         if (shared.decay_rows.empty()) criterion_3(settings, shared);
         return criterion_6(settings, shared);
       }},
      {7, "moment decay", [&] { return criterion_7(settings, shared); }},
      {8, "spike predictor consistency", [&] { return criterion_8(settings, shared); }},
      {9, "deterministic-equivalent cross-check", [&] { return criterion_9(settings, shared); }},
      {10, "real Gaussian CLT", [&] { return criterion_10(settings, shared); }},
      {11, "complex Gaussian CLT", [&] { return criterion_11(settings, shared); }},
      {12, "Rademacher universality discriminator", [&] { return criterion_12(settings, shared); }},
      {13, "convergence sweep", [&] { return criterion_13(settings, shared); }},
      {14, "thread-count determinism", [&] { return criterion_14(settings, shared); }},
  };

  int unexpected = 0;
  int failed = 0;
  std::ostringstream summary;
  for (const auto& c : criteria) {
    if (!settings.only.empty() && !settings.only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool expected = settings.expect_fail.count(c.id) > 0;
    if (!o.pass) {
      ++failed;
      if (!expected) ++unexpected;
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " #" << c.id << " " << c.title << ": " << o.detail << " [" << fmt(secs)
         << " s]" << (!o.pass && expected ? " (known failure)" : "");
    std::cout << line.str() << std::endl;
    summary << line.str() << "\n";
  }
  std::cout << failed << " failed, " << unexpected << " unexpected" << std::endl;
  summary << failed << " failed, " << unexpected << " unexpected\n";
  save(settings, "acceptance_summary.txt", summary.str());
  return unexpected == 0 ? 0 : 1;
}
