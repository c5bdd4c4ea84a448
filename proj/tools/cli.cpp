#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmrmt/clt_harness.hpp"
#include "lmrmt/covariance_models.hpp"
#include "lmrmt/det_equiv.hpp"
#include "lmrmt/errors.hpp"
#include "lmrmt/kernel_operator.hpp"
#include "lmrmt/parallel.hpp"
#include "lmrmt/report_io.hpp"
#include "lmrmt/rmt_sampler.hpp"
#include "lmrmt/spike_predictor.hpp"

#ifndef LMRMT_VERSION
#define LMRMT_VERSION "0.0.0"
#endif

namespace lmrmt::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string config;
  std::string out;
};

struct ModelFlags {
  std::size_t N = 256;
  std::size_t n = 256;
  std::size_t m = 2;
  std::string law = "real_gaussian";
  double rho = 0.4;
  std::string route = "decay";
  std::string L = "constant";
  double L_c = 1.0;
  std::string normalization = "inverse_two_pi";
  std::string gamma = "toeplitz";
  std::vector<double> spikes{1.0, 0.5, 0.25};
  double tail_exponent = 2.0;
  std::vector<double> gamma_diagonal;
  std::vector<double> c_diagonal;
  double max_gap_ratio = 0.999;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read config file " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<std::string> json_to_args(const json& v) {
  std::vector<std::string> out;
  auto scalar = [](const json& s) -> std::string {
    if (s.is_string()) return s.get<std::string>();
    if (s.is_boolean()) return s.get<bool>() ? "true" : "false";
    return s.dump();
  };
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(scalar(e));
  } else {
    out.push_back(scalar(v));
  }
  return out;
}

// Fills options the user did not pass from matching config keys
// (option long name, with '-' or '_').
void merge_config(CLI::App* sub, const json& config) {
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->count() > 0) continue;
    for (const std::string& name : opt->get_lnames()) {
      if (name == "config" || name == "help") continue;
      std::string underscored = name;
      std::replace(underscored.begin(), underscored.end(), '-', '_');
      const json* value = nullptr;
      if (config.contains(name)) {
        value = &config.at(name);
      } else if (config.contains(underscored)) {
        value = &config.at(underscored);
      }
      if (!value) continue;
      try {
        opt->add_result(json_to_args(*value));
        opt->run_callback();
      } catch (const CLI::Error& e) {
        throw InvalidArgument("config key '" + name + "': " + e.what());
      }
      break;
    }
  }
}

SlowlyVarying slowly_varying_from(const std::string& kind, double c) {
  if (kind == "constant") return SlowlyVarying::constant(c);
  if (kind == "log_growth") return SlowlyVarying::log_growth();
  if (kind == "log_decay") return SlowlyVarying::log_decay();
  throw InvalidArgument("unknown slowly varying function '" + kind + "' (expected constant, log_growth, log_decay)");
}

Route route_from(const std::string& s) {
  if (s == "decay") return Route::decay;
  if (s == "density") return Route::density;
  throw InvalidArgument("unknown route '" + s + "' (expected decay or density)");
}

FourierNormalization normalization_from(const std::string& s) {
  if (s == "inverse_two_pi") return FourierNormalization::inverse_two_pi;
  if (s == "unit") return FourierNormalization::unit;
  throw InvalidArgument("unknown normalization '" + s + "' (expected inverse_two_pi or unit)");
}

ToeplitzSpec spec_from(double rho, const std::string& L, double c, const std::string& route,
                       const std::string& normalization) {
  DensityQuadrature q;
  q.normalization = normalization_from(normalization);
  return ToeplitzSpec(rho, slowly_varying_from(L, c), route_from(route), q);
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--N", f.N, "Row dimension N")->capture_default_str();
  sub->add_option("--n", f.n, "Column dimension n")->capture_default_str();
  sub->add_option("--m", f.m, "Number of tracked spikes")->capture_default_str();
  sub->add_option("--law", f.law, "Entry law")->capture_default_str();
  sub->add_option("--rho", f.rho, "Memory exponent in (0, 1)")->capture_default_str();
  sub->add_option("--route", f.route, "decay or density")->capture_default_str();
  sub->add_option("--L", f.L, "constant, log_growth or log_decay")->capture_default_str();
  sub->add_option("--L-c", f.L_c, "Value of a constant L")->capture_default_str();
  sub->add_option("--normalization", f.normalization, "inverse_two_pi or unit")->capture_default_str();
  sub->add_option("--gamma", f.gamma, "toeplitz, spikes or diagonal")->capture_default_str();
  sub->add_option("--spikes", f.spikes, "Leading Gamma eigenvalues for --gamma spikes");
  sub->add_option("--tail-exponent", f.tail_exponent, "Tail k^-p after the spikes")->capture_default_str();
  sub->add_option("--gamma-diagonal", f.gamma_diagonal, "Explicit Gamma spectrum for --gamma diagonal");
  sub->add_option("--c-diagonal", f.c_diagonal, "Explicit C spectrum (default identity)");
  sub->add_option("--max-gap-ratio", f.max_gap_ratio, "Largest admissible lambda_{j+1}/lambda_j")
      ->capture_default_str();
}

ModelConfig model_from(const ModelFlags& f, const json& config, CLI::App* sub) {
  ModelConfig cfg;
  // A full "model" object in the config file is the base; explicit flags win.
  if (config.contains("model")) {
    cfg = ModelConfig::from_json(config.at("model"));
    auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
    if (given("--N")) cfg.N = f.N;
    if (given("--n")) cfg.n = f.n;
    if (given("--m")) cfg.m = f.m;
    if (given("--law")) cfg.law = entry_law_from_string(f.law);
    if (given("--max-gap-ratio")) cfg.max_gap_ratio = f.max_gap_ratio;
    if (given("--c-diagonal")) cfg.C.diagonal = to_vector(f.c_diagonal);
    return cfg;
  }
  cfg.N = f.N;
  cfg.n = f.n;
  cfg.m = f.m;
  cfg.law = entry_law_from_string(f.law);
  cfg.max_gap_ratio = f.max_gap_ratio;
  if (!f.c_diagonal.empty()) cfg.C.diagonal = to_vector(f.c_diagonal);
  if (f.gamma == "toeplitz") {
    cfg.Gamma.toeplitz = spec_from(f.rho, f.L, f.L_c, f.route, f.normalization);
  } else if (f.gamma == "spikes") {
    cfg.Gamma.spikes = f.spikes;
    cfg.Gamma.tail_exponent = f.tail_exponent;
  } else if (f.gamma == "diagonal") {
    if (f.gamma_diagonal.empty()) throw InvalidArgument("--gamma diagonal needs --gamma-diagonal values");
    cfg.Gamma.diagonal = to_vector(f.gamma_diagonal);
  } else {
    throw InvalidArgument("unknown --gamma '" + f.gamma + "' (expected toeplitz, spikes or diagonal)");
  }
  return cfg;
}

std::size_t resolve_thread_flag(const Common& common, CLI::App* sub) {
  if (sub->get_option("--threads")->count() > 0) return common.threads;
  if (const char* env = std::getenv("SPECTRAL_LM_THREADS")) {
    try {
      return static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("SPECTRAL_LM_THREADS is not a number: ") + env);
    }
  }
  return common.threads;
}

// Collects outputs; the manifest is written last.
class Outputs {
 public:
  void write(const fs::path& path, const std::string& content) {
    atomic_write(path, content);
    files_.push_back(path.string());
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::vector<std::string> files_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Every JSON report names its kind and schema so readers can reject stale files.
constexpr int kSchemaVersion = 1;

json stamped(json j, const std::string& kind) {
  j["report_kind"] = kind;
  j["schema_version"] = kSchemaVersion;
  return j;
}

template <class Fn>
std::string to_string_stream(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

fs::path require_out(const Common& common) {
  if (common.out.empty()) throw InvalidArgument("--out is required");
  return fs::path(common.out);
}

struct Context {
  Common common;
  json config = json::object();
  std::string config_text;
  std::size_t threads = 0;
  Outputs outputs;
};

void cmd_kernel_eigs(Context& ctx, double rho, std::size_t grid, std::size_t m) {
  const fs::path out = require_out(ctx.common);
  const KernelEigenSystem sys = kernel_eigs(rho, grid, m);
  json j = sys.to_json();
  j["boundary_deviation"] = to_json(boundary_check(sys));
  j["boundary_target"] = std::sqrt(1.0 - rho);
  ctx.outputs.write(out, dump(stamped(j, "kernel_eigs")));
  ctx.outputs.write(sibling_path(out, "_functions.csv"),
                    to_string_stream([&](std::ostream& os) { write_functions_csv(os, sys); }));
}

void cmd_toeplitz_spectrum(Context& ctx, const ToeplitzSpec& spec, const std::vector<std::size_t>& sizes,
                           std::size_t j_max, std::size_t kernel_grid) {
  const fs::path out = require_out(ctx.common);
  const KernelEigenSystem kernel = kernel_eigs(spec.rho(), kernel_grid, std::max<std::size_t>(j_max, 1));
  const auto rows = toeplitz_vs_kernel_report(spec, sizes, j_max, kernel, ctx.threads);
  ctx.outputs.write(out, to_string_stream([&](std::ostream& os) { write_report_csv(os, rows); }));
  json j;
  j["spec"] = spec.to_json();
  j["kernel_grid"] = kernel_grid;
  j["kernel_values"] = to_json(kernel.values);
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"n", r.n}, {"j", r.j}, {"lambda", r.lambda}, {"ratio", r.ratio}, {"target", r.target},
                   {"sup_dev", r.sup_dev}, {"deloc", r.deloc}, {"scaled_vector", to_json(r.scaled_vector)},
                   {"kernel_values", to_json(r.kernel_values)}});
  }
  j["rows"] = arr;
  ctx.outputs.write(sibling_path(out, ".json"), dump(stamped(j, "toeplitz_vs_kernel")));
}

void cmd_compare_pair(Context& ctx, double rho, const SlowlyVarying& L, const std::string& normalization,
                      const std::vector<std::size_t>& sizes) {
  const fs::path out = require_out(ctx.common);
  DensityQuadrature q;
  q.normalization = normalization_from(normalization);
  const auto rows = compare_toeplitz_pair(rho, L, sizes, q, ctx.threads);
  ctx.outputs.write(out, to_string_stream([&](std::ostream& os) { write_pair_csv(os, rows); }));
}

void cmd_diagnose_moments(Context& ctx, const ToeplitzSpec& spec, const std::vector<std::size_t>& sizes) {
  const fs::path out = require_out(ctx.common);
  const auto rows = moment_decay_table(spec, sizes);
  ctx.outputs.write(out, to_string_stream([&](std::ostream& os) {
                      CsvWriter csv(os);
                      csv.row({"n", "lambda1", "first_moment_stat", "second_moment_stat"});
                      for (const auto& r : rows) csv.values(r.n, r.lambda1, r.first_moment_stat, r.second_moment_stat);
                    }));
}

PopulationModel population_from(const std::vector<double>& c, const std::vector<double>& t, const ModelConfig& cfg) {
  if (!c.empty() || !t.empty()) {
    if (c.empty() || t.empty()) throw InvalidArgument("--c and --t must be given together");
    return PopulationModel(to_vector(c), to_vector(t));
  }
  return prepare_model(cfg).population();
}

void cmd_theta(Context& ctx, const PopulationModel& pop, std::size_t j, std::size_t order) {
  const fs::path out = require_out(ctx.common);
  const SpikePrediction p = predict_spike(j, pop, order, true);
  ctx.outputs.write(out, dump(stamped(p.to_json(), "spike_prediction")));
}

void cmd_det_equiv(Context& ctx, const PopulationModel& pop, std::size_t j, double x, double eta) {
  const fs::path out = require_out(ctx.common);
  const Eigen::VectorXd reduced = reduced_spectrum(j, pop.t());
  json result;
  result["j"] = j;
  result["x"] = x;
  result["eta"] = eta;
  DetEquivSolution sol;
  if (eta > 0.0) {
    sol = solve_det_equiv({x, eta}, pop.c(), reduced);
  } else {
    sol = solve_det_equiv_real(x, pop.c(), reduced);
    result["support_margin"] = support_margin(x, sol, pop.c(), reduced);
    result["outside_support"] = outside_support(x, pop.c(), reduced);
  }
  result["g_c"] = {{"re", sol.g_c.real()}, {"im", sol.g_c.imag()}};
  result["g_gamma"] = {{"re", sol.g_gamma.real()}, {"im", sol.g_gamma.imag()}};
  result["iterations"] = sol.iterations;
  result["used_newton"] = sol.used_newton;
  ctx.outputs.write(out, dump(stamped(result, "det_equiv")));
}

void cmd_clt(Context& ctx, const ModelConfig& cfg, std::size_t reps, std::ostream& err) {
  const fs::path out = require_out(ctx.common);
  CltOptions options;
  options.threads = ctx.threads;
  const CltReport report = run_clt_experiment(cfg, reps, ctx.common.seed, options);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  ctx.outputs.write(sibling_path(out, "_samples.csv"),
                    to_string_stream([&](std::ostream& os) { report.write_samples_csv(os); }));
  ctx.outputs.write(out, dump(stamped(report.to_json(), "clt")));
}

void cmd_converge(Context& ctx, const ModelConfig& cfg, const std::vector<std::size_t>& sizes, double aspect,
                  std::size_t reps) {
  const fs::path out = require_out(ctx.common);
  if (!(aspect > 0.0)) throw InvalidArgument("--aspect must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (std::size_t N : sizes) {
    dims.emplace_back(N, static_cast<std::size_t>(std::llround(static_cast<double>(N) * aspect)));
  }
  const auto rows = convergence_sweep(cfg, dims, reps, ctx.common.seed, ctx.threads);
  ctx.outputs.write(out, to_string_stream([&](std::ostream& os) { write_sweep_csv(os, rows); }));
}

void write_manifest(const Context& ctx, const std::string& command, const std::string& started) {
  const fs::path out(ctx.common.out);
  json m;
  m["command"] = command;
  m["config_path"] = ctx.common.config.empty() ? json(nullptr) : json(ctx.common.config);
  m["config_hash"] = ctx.common.config.empty() ? json(nullptr) : json(hex64(fnv1a64(ctx.config_text)));
  m["seed"] = ctx.common.seed;
  m["threads"] = resolve_threads(ctx.threads);
  m["started"] = started;
  m["finished"] = timestamp();
  m["outputs"] = ctx.outputs.files();
  m["version"] = std::string("spectral-lm ") + LMRMT_VERSION;
  atomic_write(sibling_path(out, ".manifest.json"), dump(m));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-memory Toeplitz spectra, kernel asymptotics and spiked-eigenvalue CLT experiments",
               "spectral-lm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("spectral-lm ") + LMRMT_VERSION);

  Context ctx;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ctx.common.seed, "Master seed")->capture_default_str();
    sub->add_option("--threads", ctx.common.threads, "Worker cap (0 = all cores; env SPECTRAL_LM_THREADS)");
    sub->add_option("--config", ctx.common.config, "JSON file with default option values");
    sub->add_option("--out", ctx.common.out, "Primary output file");
  };

  // kernel-eigs
  double k_rho = 0.5;
  std::size_t k_grid = 2048;
  std::size_t k_m = 5;
  auto* kernel = app.add_subcommand("kernel-eigs", "Eigenpairs of the |x - y|^-rho kernel on (0, 1)");
  kernel->add_option("--rho", k_rho, "Exponent in (0, 1)")->capture_default_str();
  kernel->add_option("--grid", k_grid, "Number of grid cells")->capture_default_str();
  kernel->add_option("--m", k_m, "Number of eigenpairs")->capture_default_str();
  add_common(kernel);

  // toeplitz-spectrum, compare-pair, diagnose-moments share the covariance-model flags.
  double s_rho = 0.5;
  std::string s_L = "constant";
  double s_Lc = 1.0;
  std::string s_route = "decay";
  std::string s_norm = "inverse_two_pi";
  std::vector<std::size_t> s_sizes{512, 1024, 2048, 4096};
  std::size_t s_jmax = 3;
  std::size_t s_kgrid = 4096;
  auto add_spec = [&](CLI::App* sub) {
    sub->add_option("--rho", s_rho, "Exponent in (0, 1)")->capture_default_str();
    sub->add_option("--L", s_L, "constant, log_growth or log_decay")->capture_default_str();
    sub->add_option("--L-c", s_Lc, "Value of a constant L")->capture_default_str();
    sub->add_option("--route", s_route, "decay or density")->capture_default_str();
    sub->add_option("--normalization", s_norm, "inverse_two_pi or unit")->capture_default_str();
    sub->add_option("--sizes", s_sizes, "Increasing matrix sizes");
  };
  auto* toeplitz = app.add_subcommand("toeplitz-spectrum", "Toeplitz eigenvalues and eigenvectors against the kernel");
  add_spec(toeplitz);
  toeplitz->add_option("--j-max", s_jmax, "Eigen-indices reported")->capture_default_str();
  toeplitz->add_option("--kernel-grid", s_kgrid, "Kernel grid resolution")->capture_default_str();
  add_common(toeplitz);

  auto* pair = app.add_subcommand("compare-pair", "Density-route matrices with L versus L == 1");
  add_spec(pair);
  add_common(pair);

  auto* moments = app.add_subcommand("diagnose-moments", "Normalised trace moments along a size ladder");
  add_spec(moments);
  add_common(moments);

  // Model-based commands.
  ModelFlags mf;
  std::vector<double> p_c;
  std::vector<double> p_t;
  std::size_t p_j = 1;
  std::size_t p_order = 10;
  double p_x = 1.0;
  double p_eta = 0.0;
  std::size_t reps = 2000;
  std::size_t sweep_reps = 50;
  std::vector<std::size_t> sweep_sizes{64, 128, 256, 512};
  double aspect = 1.0;

  auto* theta = app.add_subcommand("theta", "Spike location from the spike equation and its power series");
  add_model_flags(theta, mf);
  theta->add_option("--c", p_c, "C spectrum (overrides the model)");
  theta->add_option("--t", p_t, "Gamma spectrum, descending (overrides the model)");
  theta->add_option("--j", p_j, "Spike index (one-based)")->capture_default_str();
  theta->add_option("--order", p_order, "Series order")->capture_default_str();
  add_common(theta);

  auto* det = app.add_subcommand("det-equiv", "Deterministic-equivalent system at x + i eta");
  add_model_flags(det, mf);
  det->add_option("--c", p_c, "C spectrum (overrides the model)");
  det->add_option("--t", p_t, "Gamma spectrum, descending (overrides the model)");
  det->add_option("--j", p_j, "Removed spike index (one-based)")->capture_default_str();
  det->add_option("--x", p_x, "Real part of the spectral parameter")->capture_default_str();
  det->add_option("--eta", p_eta, "Imaginary part; 0 takes the real-axis limit")->capture_default_str();
  add_common(det);

  auto* clt = app.add_subcommand("clt", "Monte Carlo fluctuations of the top eigenvalues");
  add_model_flags(clt, mf);
  clt->add_option("--reps", reps, "Replications")->capture_default_str();
  add_common(clt);

  auto* converge = app.add_subcommand("converge", "Median eigenvalue ratios along a size ladder");
  add_model_flags(converge, mf);
  converge->add_option("--sizes", sweep_sizes, "Increasing N values");
  converge->add_option("--aspect", aspect, "n / N")->capture_default_str();
  converge->add_option("--reps", sweep_reps, "Replications per size")->capture_default_str();
  add_common(converge);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "spectral-lm " << LMRMT_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  const std::string started = timestamp();
  try {
    if (!ctx.common.config.empty()) {
      ctx.config_text = read_file(ctx.common.config);
      try {
        ctx.config = json::parse(ctx.config_text);
      } catch (const json::exception& e) {
        throw InvalidArgument("config file is not valid JSON: " + std::string(e.what()));
      }
      if (!ctx.config.is_object()) throw InvalidArgument("config file must hold a JSON object");
      merge_config(sub, ctx.config);
    }
    ctx.threads = resolve_thread_flag(ctx.common, sub);

    if (sub == kernel) {
      cmd_kernel_eigs(ctx, k_rho, k_grid, k_m);
    } else if (sub == toeplitz) {
      cmd_toeplitz_spectrum(ctx, spec_from(s_rho, s_L, s_Lc, s_route, s_norm), s_sizes, s_jmax, s_kgrid);
    } else if (sub == pair) {
      cmd_compare_pair(ctx, s_rho, slowly_varying_from(s_L, s_Lc), s_norm, s_sizes);
    } else if (sub == moments) {
      cmd_diagnose_moments(ctx, spec_from(s_rho, s_L, s_Lc, s_route, s_norm), s_sizes);
    } else if (sub == theta) {
      const ModelConfig cfg = model_from(mf, ctx.config, sub);
      cmd_theta(ctx, population_from(p_c, p_t, cfg), p_j, p_order);
    } else if (sub == det) {
      const ModelConfig cfg = model_from(mf, ctx.config, sub);
      cmd_det_equiv(ctx, population_from(p_c, p_t, cfg), p_j, p_x, p_eta);
    } else if (sub == clt) {
      cmd_clt(ctx, model_from(mf, ctx.config, sub), reps, err);
    } else if (sub == converge) {
      cmd_converge(ctx, model_from(mf, ctx.config, sub), sweep_sizes, aspect, sweep_reps);
    }
    write_manifest(ctx, command, started);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lmrmt::cli
