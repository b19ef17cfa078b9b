#include "nanosqueeze/specfun.hpp"

#include <algorithm>
#include <cmath>

namespace nanosq::specfun {

namespace {

constexpr double kLog2e = 1.4426950408889634074;  // log2(e)

void check_order(int n) {
  if (n < 0) throw std::invalid_argument("spherical function order must be >= 0");
  if (n > kMaxOrder)
    throw std::invalid_argument("spherical function order exceeds cap 200");
}

// log2 of (2n+1)!! via lgamma: (2n+1)!! = (2n+1)!/(2^n n!)
double log2_double_factorial_odd(int n) {
  return (std::lgamma(2.0 * n + 2.0) - std::lgamma(n + 1.0)) * kLog2e - n;
}

}  // namespace

void Scaled::normalize() {
  double m = std::max(std::abs(man.real()), std::abs(man.imag()));
  if (m == 0.0 || !std::isfinite(m)) {
    if (m == 0.0) exp = 0;
    return;
  }
  int e;
  std::frexp(m, &e);
  man = cplx(std::ldexp(man.real(), -e), std::ldexp(man.imag(), -e));
  exp += e;
}

cplx Scaled::value() const {
  if (isZero()) return {0.0, 0.0};
  if (exp < -1070) return {0.0, 0.0};
  if (exp > 1020) {
    double s = std::numeric_limits<double>::infinity();
    return {man.real() * s, man.imag() * s};
  }
  return {std::ldexp(man.real(), static_cast<int>(exp)),
          std::ldexp(man.imag(), static_cast<int>(exp))};
}

Scaled Scaled::from(cplx v) {
  Scaled s{v, 0};
  s.normalize();
  return s;
}

Scaled Scaled::operator*(const Scaled& o) const {
  Scaled r{man * o.man, exp + o.exp};
  r.normalize();
  return r;
}

Scaled Scaled::operator*(cplx s) const {
  Scaled r{man * s, exp};
  r.normalize();
  return r;
}

Scaled Scaled::operator/(const Scaled& o) const {
  Scaled r{man / o.man, exp - o.exp};
  r.normalize();
  return r;
}

Scaled Scaled::operator+(const Scaled& o) const {
  if (isZero()) return o;
  if (o.isZero()) return *this;
  long e = std::max(exp, o.exp);
  long da = exp - e, db = o.exp - e;
  cplx a = (da < -1070) ? cplx{} : cplx(std::ldexp(man.real(), (int)da),
                                        std::ldexp(man.imag(), (int)da));
  cplx b = (db < -1070) ? cplx{} : cplx(std::ldexp(o.man.real(), (int)db),
                                        std::ldexp(o.man.imag(), (int)db));
  Scaled r{a + b, e};
  r.normalize();
  return r;
}

Scaled Scaled::operator-(const Scaled& o) const {
  return *this + Scaled{-o.man, o.exp};
}

Scaled scaled_exp_i(cplx z) {
  // e^{iz} = e^{-Im z} (cos(Re z) + i sin(Re z))
  double e2 = -z.imag() * kLog2e;
  double ei = std::floor(e2);
  double frac = e2 - ei;
  Scaled r;
  r.man = std::exp2(frac) * cplx(std::cos(z.real()), std::sin(z.real()));
  r.exp = static_cast<long>(ei);
  r.normalize();
  return r;
}

namespace {

Scaled scaled_sin(cplx z) {
  Scaled e1 = scaled_exp_i(z), e2 = scaled_exp_i(-z);
  return (e1 - e2) * cplx(0.0, -0.5);
}

Scaled scaled_cos(cplx z) {
  Scaled e1 = scaled_exp_i(z), e2 = scaled_exp_i(-z);
  return (e1 + e2) * cplx(0.5, 0.0);
}

bool scaled_abs_less(const Scaled& a, const Scaled& b) {
  if (a.isZero()) return !b.isZero();
  if (b.isZero()) return false;
  if (a.exp != b.exp) return a.exp < b.exp;
  return std::abs(a.man) < std::abs(b.man);
}

// Ascending power series, one order. Used for small |z| where the recurrences
// lose digits.
Scaled j_series(int n, cplx z) {
  double lz = std::log2(std::abs(z));
  double e2 = n * lz - log2_double_factorial_odd(n);
  double ei = std::floor(e2);
  Scaled pre;
  pre.man = std::exp2(e2 - ei) * std::exp(cplx(0.0, n * std::arg(z)));
  pre.exp = static_cast<long>(ei);
  cplx z2 = -0.5 * z * z;
  cplx term = 1.0, sum = 1.0;
  for (int k = 1; k <= 60; ++k) {
    term *= z2 / (static_cast<double>(k) * (2.0 * n + 2.0 * k + 1.0));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  Scaled r = pre * sum;
  r.normalize();
  return r;
}

}  // namespace

std::vector<Scaled> sph_bessel_j_ladder(int nmax, cplx z) {
  check_order(nmax);
  std::vector<Scaled> j(nmax + 1);
  if (z == cplx(0.0, 0.0)) {
    j[0] = Scaled::from(1.0);
    return j;
  }
  double az = std::abs(z);
  if (az < 1e-2) {
    for (int n = 0; n <= nmax; ++n) j[n] = j_series(n, z);
    return j;
  }
  // Miller downward recurrence, normalized against j_0 or j_1.
  int start = nmax + 16 + static_cast<int>(az) +
              static_cast<int>(6.0 * std::cbrt(az + 1.0));
  Scaled fp;                       // f_{n+1}
  Scaled fc = Scaled::from(1.0);   // f_n at n = start
  for (int n = start; n >= 1; --n) {
    Scaled fm = fc * ((2.0 * n + 1.0) / z) - fp;
    fp = fc;
    fc = fm;
    if (n - 1 <= nmax) j[n - 1] = fc;
    if (n <= nmax) j[n] = fp;
  }
  Scaled j0c = scaled_sin(z) / Scaled::from(z);
  Scaled j1c = (scaled_sin(z) / Scaled::from(z * z)) - (scaled_cos(z) / Scaled::from(z));
  Scaled factor = scaled_abs_less(j0c, j1c) && nmax >= 1 ? j1c / j[1] : j0c / j[0];
  for (auto& v : j) v = v * factor;
  return j;
}

std::vector<Scaled> sph_hankel1_ladder(int nmax, cplx z) {
  check_order(nmax);
  if (z == cplx(0.0, 0.0))
    throw std::domain_error("spherical Hankel function singular at z = 0");
  std::vector<Scaled> h(nmax + 1);
  Scaled e = scaled_exp_i(z);
  h[0] = e * (cplx(0.0, -1.0) / z);
  if (nmax >= 1) h[1] = h[0] * (1.0 / z - cplx(0.0, 1.0));
  for (int n = 1; n < nmax; ++n)
    h[n + 1] = h[n] * ((2.0 * n + 1.0) / z) - h[n - 1];
  return h;
}

namespace {

cplx checked_value(const Scaled& s, const char* what) {
  cplx v = s.value();
  if (!s.isZero() && !(std::isfinite(v.real()) && std::isfinite(v.imag())))
    throw std::overflow_error(what);
  return v;
}

}  // namespace

cplx sph_bessel_j(int n, cplx z) {
  check_order(n);
  return checked_value(sph_bessel_j_ladder(n, z)[n], "sph_bessel_j overflow");
}

cplx sph_hankel1(int n, cplx z) {
  check_order(n);
  return checked_value(sph_hankel1_ladder(n, z)[n], "sph_hankel1 overflow");
}

cplx sph_bessel_y(int n, cplx z) {
  check_order(n);
  if (z == cplx(0.0, 0.0))
    throw std::domain_error("spherical Bessel y singular at z = 0");
  Scaled y = (sph_hankel1_ladder(n, z)[n] - sph_bessel_j_ladder(n, z)[n]) *
             cplx(0.0, -1.0);
  return checked_value(y, "sph_bessel_y overflow");
}

std::vector<ScaledRiccati> riccati_psi_ladder(int nmax, cplx z) {
  auto j = sph_bessel_j_ladder(nmax, z);
  std::vector<ScaledRiccati> out(nmax + 1);
  Scaled zs = Scaled::from(z);
  out[0].value = j[0] * zs;                  // sin z
  out[0].derivative = scaled_cos(z);
  for (int n = 1; n <= nmax; ++n) {
    out[n].value = j[n] * zs;
    out[n].derivative = j[n - 1] * zs - j[n] * cplx(static_cast<double>(n), 0.0);
  }
  return out;
}

std::vector<ScaledRiccati> riccati_xi_ladder(int nmax, cplx z) {
  auto h = sph_hankel1_ladder(nmax, z);
  std::vector<ScaledRiccati> out(nmax + 1);
  Scaled zs = Scaled::from(z);
  out[0].value = h[0] * zs;                  // -i e^{iz}
  out[0].derivative = scaled_exp_i(z);       // d/dz(-i e^{iz}) = e^{iz}
  for (int n = 1; n <= nmax; ++n) {
    out[n].value = h[n] * zs;
    out[n].derivative = h[n - 1] * zs - h[n] * cplx(static_cast<double>(n), 0.0);
  }
  return out;
}

RiccatiFunctions riccati_functions(int n, cplx z) {
  check_order(n);
  if (z == cplx(0.0, 0.0))
    throw std::domain_error("Riccati functions singular at z = 0");
  auto psi = riccati_psi_ladder(n, z);
  auto xi = riccati_xi_ladder(n, z);
  RiccatiFunctions r;
  r.psi = {checked_value(psi[n].value, "riccati psi overflow"),
           checked_value(psi[n].derivative, "riccati psi' overflow")};
  r.xi = {checked_value(xi[n].value, "riccati xi overflow"),
          checked_value(xi[n].derivative, "riccati xi' overflow")};
  return r;
}

void mie_angular_ladder(int nmax, double x, std::vector<double>& pi_n,
                        std::vector<double>& tau_n) {
  check_order(nmax);
  if (std::abs(x) > 1.0)
    throw std::invalid_argument("mie_angular: |cos theta| must be <= 1");
  pi_n.assign(nmax + 1, 0.0);
  tau_n.assign(nmax + 1, 0.0);
  if (nmax >= 1) {
    pi_n[1] = 1.0;
    tau_n[1] = x;
  }
  for (int n = 2; n <= nmax; ++n) {
    pi_n[n] = ((2.0 * n - 1.0) * x * pi_n[n - 1] - n * pi_n[n - 2]) / (n - 1.0);
    tau_n[n] = n * x * pi_n[n] - (n + 1.0) * pi_n[n - 1];
  }
}

MieAngular mie_angular(int n, double cos_theta) {
  check_order(n);
  std::vector<double> p, t;
  mie_angular_ladder(n, cos_theta, p, t);
  return {p[n], t[n]};
}

LegendreTrio legendre_trio(int nmax, int m, double x) {
  check_order(nmax);
  if (m < 0 || m > nmax)
    throw std::invalid_argument("legendre_trio: need 0 <= m <= nmax");
  if (std::abs(x) > 1.0)
    throw std::invalid_argument("legendre_trio: |cos theta| must be <= 1");
  LegendreTrio t;
  t.P.assign(nmax + 1, 0.0);
  t.pi.assign(nmax + 1, 0.0);
  t.tau.assign(nmax + 1, 0.0);
  double s = std::sqrt(std::max(0.0, 1.0 - x * x));

  if (m == 0) {
    t.P[0] = 1.0;
    if (nmax >= 1) t.P[1] = x;
    for (int n = 2; n <= nmax; ++n)
      t.P[n] = ((2.0 * n - 1.0) * x * t.P[n - 1] - (n - 1.0) * t.P[n - 2]) / n;
    if (s > 1e-12) {
      for (int n = 1; n <= nmax; ++n)
        t.tau[n] = -n * (t.P[n - 1] - x * t.P[n]) / s;
    }
    return t;
  }

  // seed at n = m: Pb_m^m = c_m s^m, pi seed regular at the poles
  double coef = 1.0;
  for (int k = 1; k <= m; ++k) coef *= std::sqrt((2.0 * k - 1.0) / (2.0 * k));
  double sm1 = 1.0;  // s^{m-1}
  for (int k = 1; k < m; ++k) sm1 *= s;
  t.pi[m] = m * coef * sm1;
  t.P[m] = coef * sm1 * s;
  t.tau[m] = (m * x * t.pi[m]) / m;  // sqrt(m^2-m^2) term vanishes
  for (int n = m + 1; n <= nmax; ++n) {
    double a = std::sqrt(static_cast<double>(n - m) * (n + m));
    double b = (n - 1 > m)
                   ? std::sqrt(static_cast<double>(n - 1 - m) * (n - 1 + m))
                   : 0.0;
    t.P[n] = ((2.0 * n - 1.0) * x * t.P[n - 1] - b * t.P[n - 2]) / a;
    t.pi[n] = ((2.0 * n - 1.0) * x * t.pi[n - 1] - b * t.pi[n - 2]) / a;
    t.tau[n] = (n * x * t.pi[n] - a * t.pi[n - 1]) / m;
  }
  return t;
}

}  // namespace nanosq::specfun
