#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nanosq::quad {

struct Options {
  double rel_tol = 1e-9;
  int min_intervals = 8;
  int max_doublings = 14;
};

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
// 10-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirror).
inline constexpr double kGlNode[5] = {0.1488743389816312, 0.4333953941292472,
                                      0.6794095682990244, 0.8650633666889845,
                                      0.9739065285171717};
inline constexpr double kGlWeight[5] = {0.2955242247147529, 0.2692667193099963,
                                        0.2190863625159820, 0.1494513491505806,
                                        0.0666713443086881};

template <class F>
double gl10(F&& f, double a, double b) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < 5; ++i)
    s += kGlWeight[i] * (f(c - h * kGlNode[i]) + f(c + h * kGlNode[i]));
  return s * h;
}
}  // namespace detail

// Composite Gauss-Legendre with interval doubling. All nodes are interior, so
// integrable endpoint artifacts (0/0 limits guarded in the integrand) are
// never touched. Throws QuadratureError if doubling stops converging.
template <class F>
double integrate(F&& f, double a, double b, const Options& opt = {}) {
  if (!(b > a)) throw std::invalid_argument("integrate: empty interval");
  int n = opt.min_intervals;
  auto composite = [&](int m) {
    double h = (b - a) / m, s = 0;
    for (int i = 0; i < m; ++i) s += detail::gl10(f, a + i * h, a + (i + 1) * h);
    return s;
  };
  double prev = composite(n);
  for (int d = 0; d < opt.max_doublings; ++d) {
    n *= 2;
    double cur = composite(n);
    double scale = std::max(std::abs(cur), std::abs(prev));
    if (std::abs(cur - prev) <= opt.rel_tol * std::max(scale, 1e-300)) return cur;
    prev = cur;
  }
  throw QuadratureError("quadrature failed to converge after interval doubling");
}

// As integrate, but reports the result of the last two refinement levels so a
// caller can verify step-halving stability (no exception on slow convergence).
template <class F>
std::pair<double, double> integrate_with_refinement(F&& f, double a, double b,
                                                    int intervals) {
  auto composite = [&](int m) {
    double h = (b - a) / m, s = 0;
    for (int i = 0; i < m; ++i) s += detail::gl10(f, a + i * h, a + (i + 1) * h);
    return s;
  };
  return {composite(intervals), composite(2 * intervals)};
}

// Principal value of integral over [0, inf) of f(w)/(w - w0) for smooth f that
// keeps oscillating (possibly with polynomially growing amplitude) at large w.
// Head: pole subtraction on [0, cutoff]. Tail: segments of one asymptotic
// half-period, summed with repeated averaging (Euler transform), which
// evaluates the Abel-regularized value of the conditionally convergent rest.
struct PvOptions {
  double cutoff = 0;       // required: > w0
  double half_period = 0;  // required: asymptotic half-period of f
  int head_intervals = 64;
  int tail_segments = 28;
  double rel_tol = 1e-8;
};

template <class F>
double pv_oscillatory(F&& f, double w0, const PvOptions& opt) {
  if (!(opt.cutoff > w0) || !(w0 > 0))
    throw std::invalid_argument("pv_oscillatory: need 0 < w0 < cutoff");
  if (!(opt.half_period > 0))
    throw std::invalid_argument("pv_oscillatory: half_period must be > 0");
  double f0 = f(w0);
  auto head_f = [&](double w) {
    double u = w - w0;
    if (std::abs(u) < 1e-12 * w0) return 0.0;
    return (f(w) - f0) / u;
  };
  auto [h1, h2] =
      integrate_with_refinement(head_f, 0.0, opt.cutoff, opt.head_intervals);
  double head = h2 + f0 * std::log((opt.cutoff - w0) / w0);
  double head_err = std::abs(h2 - h1);

  const int m = opt.tail_segments;
  std::vector<double> partial(m);
  double acc = 0;
  for (int k = 0; k < m; ++k) {
    double a = opt.cutoff + k * opt.half_period;
    double b = a + opt.half_period;
    acc += detail::gl10([&](double w) { return f(w) / (w - w0); }, a, 0.5 * (a + b)) +
           detail::gl10([&](double w) { return f(w) / (w - w0); }, 0.5 * (a + b), b);
    partial[k] = acc;
  }
  // repeated averaging of the partial-sum sequence
  double prev_est = partial.back();
  std::vector<double> row = partial;
  double est = prev_est;
  for (int depth = 1; depth < m; ++depth) {
    for (size_t i = 0; i + 1 < row.size(); ++i) row[i] = 0.5 * (row[i] + row[i + 1]);
    row.pop_back();
    prev_est = est;
    est = row.front();
    if (depth > 3 && std::abs(est - prev_est) <
                         opt.rel_tol * std::max(std::abs(head + est), 1e-300))
      break;
  }
  double scale = std::max(std::abs(head + est), 1e-300);
  if (std::abs(est - prev_est) > 100 * opt.rel_tol * scale ||
      head_err > 100 * opt.rel_tol * scale)
    throw QuadratureError("pv_oscillatory: head or averaged tail failed to settle");
  return head + est;
}

}  // namespace nanosq::quad
