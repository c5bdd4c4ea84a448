#include "lmrmt/det_equiv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lmrmt/errors.hpp"

namespace lmrmt {

namespace {

using cplx = std::complex<double>;

struct Sums {
  cplx value;       // N^-1 sum_k w_k / (1 - g w_k)
  cplx derivative;  // N^-1 sum_k w_k^2 / (1 - g w_k)^2
};

Sums resolvent_sums(const Eigen::VectorXd& w, cplx g, double N) {
  cplx v = 0.0;
  cplx d = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const cplx denom = 1.0 - g * w(k);
    const cplx q = w(k) / denom;
    v += q;
    d += q * q;
  }
  return {v / N, d / N};
}

double scale_of(cplx g) { return std::max(1.0, std::abs(g)); }

bool fixed_point(cplx z, const Eigen::VectorXd& c, const Eigen::VectorXd& t, const DetEquivOptions& opt,
                 DetEquivSolution& sol) {
  const double N = static_cast<double>(c.size());
  cplx gc = sol.g_c;
  cplx gg = sol.g_gamma;
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    const cplx gg_new = resolvent_sums(t, gc, N).value / z;
    const cplx gc_full = resolvent_sums(c, gg_new, N).value / z;
    const cplx gc_new = (1.0 - opt.damping) * gc + opt.damping * gc_full;
    if (!std::isfinite(gc_new.real()) || !std::isfinite(gc_new.imag())) return false;
    const bool done = std::abs(gc_new - gc) < opt.tol * scale_of(gc_new) &&
                      std::abs(gg_new - gg) < opt.tol * scale_of(gg_new);
    gc = gc_new;
    gg = gg_new;
    if (done) {
      sol.g_c = gc;
      sol.g_gamma = gg;
      sol.iterations += it;
      return true;
    }
  }
  return false;
}

// Newton on F(g) = N^-1 sum_i c_i / (z - h(g) c_i) - g, h(g) = N^-1 sum_k t_k / (1 - g t_k).
bool newton(cplx z, const Eigen::VectorXd& c, const Eigen::VectorXd& t, const DetEquivOptions& opt,
            DetEquivSolution& sol) {
  const double N = static_cast<double>(c.size());
  cplx g = sol.g_c;
  for (std::size_t it = 1; it <= 200; ++it) {
    const Sums h = resolvent_sums(t, g, N);
    cplx F = -g;
    cplx dF_dh = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const cplx d = z - h.value * c(i);
      F += c(i) / d / N;
      dF_dh += c(i) * c(i) / (d * d) / N;
    }
    const cplx dF = dF_dh * h.derivative - 1.0;
    if (dF == 0.0) return false;
    const cplx step = F / dF;
    g -= step;
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) return false;
    if (std::abs(step) < opt.tol * scale_of(g)) {
      sol.g_c = g;
      sol.g_gamma = resolvent_sums(t, g, N).value / z;
      sol.iterations += it;
      sol.used_newton = true;
      return true;
    }
  }
  return false;
}

void check_inputs(const Eigen::VectorXd& c, const Eigen::VectorXd& t) {
  if (c.size() == 0) throw InvalidArgument("C spectrum is empty");
  if ((c.array() < 0.0).any() || (t.array() < 0.0).any()) throw InvalidArgument("spectra must be nonnegative");
}

}  // namespace

Eigen::VectorXd reduced_spectrum(std::size_t j, const Eigen::VectorXd& t) {
  if (j == 0 || j > static_cast<std::size_t>(t.size())) throw InvalidArgument("spike index out of range");
  const double tj = t(static_cast<Eigen::Index>(j - 1));
  if (!(tj > 0.0)) throw InvalidArgument("spike eigenvalue must be positive");
  Eigen::VectorXd out(t.size() - 1);
  Eigen::Index o = 0;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    if (k == static_cast<Eigen::Index>(j - 1)) continue;
    out(o++) = t(k) / tj;
  }
  return out;
}

DetEquivSolution solve_det_equiv(cplx z, const Eigen::VectorXd& c, const Eigen::VectorXd& t,
                                 const DetEquivOptions& options, const DetEquivSolution* start) {
  check_inputs(c, t);
  if (z == 0.0) throw InvalidArgument("spectral parameter must be nonzero");
  DetEquivSolution sol;
  if (start) {
    sol.g_c = start->g_c;
    sol.g_gamma = start->g_gamma;
  } else {
    sol.g_c = c.mean() / z;
    sol.g_gamma = 0.0;
  }
  const DetEquivSolution initial = sol;
  if (fixed_point(z, c, t, options, sol)) return sol;
  sol = initial;
  sol.iterations = options.max_iterations;
  if (newton(z, c, t, options, sol)) {
    const bool upper = z.imag() > 0.0;
    if (!upper || sol.g_c.imag() <= 0.0) return sol;
  }
  std::ostringstream msg;
  msg << "deterministic-equivalent system did not converge at z = " << z << " (spectral parameter likely inside or "
      << "near the support)";
  throw ConvergenceError(msg.str(), std::abs(sol.g_c - initial.g_c));
}

DetEquivSolution solve_det_equiv_real(double x, const Eigen::VectorXd& c, const Eigen::VectorXd& t,
                                      const DetEquivOptions& options) {
  if (x == 0.0) throw InvalidArgument("real-axis limit needs x != 0");
  if (!(options.eta_far > options.eta_near && options.eta_near > 0.0)) {
    throw InvalidArgument("extrapolation nodes must satisfy eta_far > eta_near > 0");
  }
  // Warm-started continuation keeps the iteration on the branch with Im g < 0.
  DetEquivSolution current;
  bool have = false;
  std::size_t total = 0;
  bool newton_used = false;
  double eta = 1.0;
  while (eta > options.eta_far * 1.0000001) {
    current = solve_det_equiv(cplx(x, eta), c, t, options, have ? &current : nullptr);
    total += current.iterations;
    newton_used = newton_used || current.used_newton;
    have = true;
    eta *= 0.1;
  }
  const DetEquivSolution far = solve_det_equiv(cplx(x, options.eta_far), c, t, options, have ? &current : nullptr);
  const DetEquivSolution near = solve_det_equiv(cplx(x, options.eta_near), c, t, options, &far);
  const double e1 = options.eta_far;
  const double e2 = options.eta_near;
  DetEquivSolution out;
  out.g_c = (e1 * near.g_c - e2 * far.g_c) / (e1 - e2);
  out.g_gamma = (e1 * near.g_gamma - e2 * far.g_gamma) / (e1 - e2);
  out.iterations = total + far.iterations + near.iterations;
  out.used_newton = newton_used || far.used_newton || near.used_newton;
  return out;
}

double support_margin(double x, const DetEquivSolution& sol, const Eigen::VectorXd& c, const Eigen::VectorXd& t) {
  const double N = static_cast<double>(c.size());
  const double gc = sol.g_c.real();
  const double gg = sol.g_gamma.real();
  double gamma = 0.0;
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    const double q = t(k) / (x * (1.0 - gc * t(k)));
    gamma += q * q;
  }
  gamma /= N;
  double gamma_tilde = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double q = c(i) / (x * (1.0 - gg * c(i)));
    gamma_tilde += q * q;
  }
  gamma_tilde /= N;
  return 1.0 - x * x * gamma * gamma_tilde;
}

bool outside_support(double x, const Eigen::VectorXd& c, const Eigen::VectorXd& t, const DetEquivOptions& options) {
  const DetEquivSolution sol = solve_det_equiv_real(x, c, t, options);
  const double tol = 1e-8;
  if (std::abs(sol.g_c.imag()) > tol * scale_of(sol.g_c) || std::abs(sol.g_gamma.imag()) > tol * scale_of(sol.g_gamma)) {
    return false;
  }
  return support_margin(x, sol, c, t) > 0.0;
}

}  // namespace lmrmt
