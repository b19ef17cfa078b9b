#include "nanosqueeze/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "nanosqueeze/constants.hpp"
#include "nanosqueeze/quadrature.hpp"

namespace nanosq::emitter {

namespace {

constexpr cplx I{0.0, 1.0};

void check_emitter(const Emitter& e) {
  if (!(e.dipole > 0)) throw std::invalid_argument("emitter: |d| must be > 0");
  if (!(e.omega_E > 0)) throw std::invalid_argument("emitter: omega_E must be > 0");
  if (e.gamma_star < 0) throw std::invalid_argument("emitter: gamma* must be >= 0");
  if (std::abs(e.orientation.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("emitter: orientation must be a unit vector");
}

double projected(const Mat3c& g, const Vec3& d, bool imag_part) {
  CVec3 gd = g.apply(d);
  cplx v = gd.x * d.x + gd.y * d.y + gd.z * d.z;
  return imag_part ? v.imag() : v.real();
}

}  // namespace

double free_space_decay_rate(const Emitter& e) {
  check_emitter(e);
  using namespace constants;
  return std::pow(e.omega_E, 3) * e.dipole * e.dipole / (3.0 * pi * eps0 * hbar * c * c * c);
}

double decay_rate(const Emitter& e, const green::SphereSystem& sys) {
  check_emitter(e);
  using namespace constants;
  double g0 = free_space_decay_rate(e);
  if (sys.radius <= 0.0) return g0;
  Mat3c gs = green::scattered_green_adaptive(sys, e.position, e.position,
                                             e.omega_E, 1e-10);
  double pref = 2.0 * e.omega_E * e.omega_E * e.dipole * e.dipole / (hbar * eps0 * c * c);
  return g0 + pref * projected(gs, e.orientation, true);
}

double lamb_shift(const Emitter& e, const green::SphereSystem& sys,
                  const QuadratureSettings& q) {
  check_emitter(e);
  using namespace constants;
  if (sys.radius <= 0.0) return e.omega_E;
  const double wE = e.omega_E;
  const double d2 = e.dipole * e.dipole;

  Mat3c g_res = green::scattered_green_adaptive(sys, e.position, e.position, wE,
                                                q.green_tol);
  double resonant = -wE * wE * d2 / (hbar * eps0 * c * c) *
                    projected(g_res, e.orientation, false);

  // imaginary-axis leg: xi = wE u/(1-u) maps (0,1) onto (0,inf)
  auto integrand = [&](double u) {
    double xi = wE * u / (1.0 - u);
    Mat3c g = green::scattered_green_adaptive(sys, e.position, e.position,
                                              cplx(0.0, xi), q.green_tol);
    double jac = wE / ((1.0 - u) * (1.0 - u));
    return xi * xi / (xi * xi + wE * wE) * projected(g, e.orientation, false) * jac;
  };
  // The integrand is suppressed by exp(-2 xi gap / c); past the point where
  // that factor reaches 1e-20 the tail is irrelevant, and the multipole series
  // would eventually exhaust its order cap anyway.
  double gap = e.position.norm() - sys.radius;
  double xi_max = std::max(30.0 * wE, 23.0 * constants::c / gap);
  double u_max = xi_max / (wE + xi_max);
  quad::Options opt;
  opt.rel_tol = q.rel_tol;
  double rotated;
  try {
    rotated = quad::integrate(integrand, 0.0, u_max, opt);
  } catch (const quad::QuadratureError&) {
    throw quad::QuadratureError(
        "lamb_shift: imaginary-axis quadrature did not converge for this geometry");
  }
  double off_resonant = -wE * d2 / (pi * hbar * eps0 * c * c) * rotated;
  return wE + resonant + off_resonant;
}

cplx rabi_enhancement(const Emitter& e, const green::SphereSystem& sys,
                      const Drive& drive) {
  check_emitter(e);
  double k = e.omega_E / constants::c;
  Vec3 kd = drive.k_dir.normalized();
  Vec3 pol = drive.polarization.normalized();
  double dp = e.orientation.dot(pol);
  if (std::abs(dp) < 1e-12)
    throw std::invalid_argument("rabi_enhancement: drive polarization is orthogonal to the dipole");
  CVec3 eloc = green::plane_wave_local_field(sys, kd, pol, e.position, e.omega_E);
  cplx num = eloc.x * e.orientation.x + eloc.y * e.orientation.y + eloc.z * e.orientation.z;
  cplx den = dp * std::exp(I * (k * kd.dot(e.position)));
  return num / den;
}

std::pair<double, double> normalized_params(double delta0, double z0,
                                            const DressedRates& d,
                                            DetuningReference ref) {
  double purcell = d.gamma / d.gamma_0;
  double num = delta0;
  if (ref == DetuningReference::bare)
    num -= 2.0 * (d.omega_E - d.omega_tilde) / d.gamma_0;
  double delta = num / (purcell * (1.0 + d.x));
  double z = z0 * std::abs(d.rabi) / (purcell * std::sqrt(1.0 + d.x));
  return {delta, z};
}

DressedRates dressed_rates(const Emitter& e, const green::SphereSystem& sys,
                           const Drive& drive, double delta0, double z0,
                           DetuningReference ref, const QuadratureSettings& q) {
  DressedRates d;
  d.omega_E = e.omega_E;
  d.gamma_0 = free_space_decay_rate(e);
  d.gamma = decay_rate(e, sys);
  d.omega_tilde = lamb_shift(e, sys, q);
  d.rabi = sys.radius > 0 ? rabi_enhancement(e, sys, drive) : cplx(1.0, 0.0);
  d.x = 2.0 * e.gamma_star / d.gamma;
  std::tie(d.delta, d.z) = normalized_params(delta0, z0, d, ref);

  d.delta_L = 0.5 * d.delta * (d.gamma + 2.0 * e.gamma_star);
  d.omega_L = d.omega_tilde + d.delta_L;
  double k = e.omega_E / constants::c;
  d.phi_L = k * drive.k_dir.normalized().dot(e.position) + std::arg(d.rabi);
  return d;
}

BlochState bloch_steady_state(double delta, double z, double x, double phi_L) {
  if (z < 0 || x < 0) throw std::invalid_argument("bloch_steady_state: z, x >= 0");
  BlochState s;
  double n = 1.0 + delta * delta + z * z;
  s.phi_dep = std::atan2(1.0, -delta);
  double amp = std::sqrt(0.5 / (1.0 + x)) * z * std::sqrt(delta * delta + 1.0) / n;
  s.sigma_s = amp * std::exp(I * (phi_L + s.phi_dep));
  s.sigma_z_s = -(1.0 + delta * delta) / n;
  return s;
}

BlochTrajectory bloch_transient(double delta, double z, double x, double phi_L,
                                cplx sigma0, double sigma_z0, double t_end,
                                double dt) {
  if (!(dt > 0) || !(t_end > 0))
    throw std::invalid_argument("bloch_transient: dt and t_end must be > 0");
  double delta_L = 0.5 * delta * (1.0 + x);
  double omega_mag = z * std::sqrt(1.0 + x) / std::sqrt(2.0);
  double fastest = std::max({1.0 + x, omega_mag, std::abs(delta_L)});
  if (dt * fastest >= 0.1)
    throw std::invalid_argument("bloch_transient: dt does not resolve the fastest rate");

  cplx omega = omega_mag * std::exp(I * phi_L);
  auto rhs = [&](cplx s, double sz, cplx& ds, double& dsz) {
    ds = (-0.5 * (1.0 + x) + I * delta_L) * s - I * 0.5 * omega * sz;
    dsz = -2.0 * std::imag(omega * std::conj(s)) - (1.0 + sz);
  };

  int steps = static_cast<int>(std::ceil(t_end / dt));
  BlochTrajectory tr;
  tr.t.reserve(steps + 1);
  tr.sigma.reserve(steps + 1);
  tr.sigma_z.reserve(steps + 1);
  cplx s = sigma0;
  double sz = sigma_z0;
  tr.t.push_back(0);
  tr.sigma.push_back(s);
  tr.sigma_z.push_back(sz);
  for (int i = 0; i < steps; ++i) {
    double h = std::min(dt, t_end - i * dt);
    cplx k1s, k2s, k3s, k4s;
    double k1z, k2z, k3z, k4z;
    rhs(s, sz, k1s, k1z);
    rhs(s + 0.5 * h * k1s, sz + 0.5 * h * k1z, k2s, k2z);
    rhs(s + 0.5 * h * k2s, sz + 0.5 * h * k2z, k3s, k3z);
    rhs(s + h * k3s, sz + h * k3z, k4s, k4z);
    s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    sz += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    tr.t.push_back(std::min((i + 1) * dt, t_end));
    tr.sigma.push_back(s);
    tr.sigma_z.push_back(sz);
  }
  return tr;
}

double atomic_variance(double delta, double z, double x, double theta_total) {
  double n = 1.0 + delta * delta + z * z;
  double c2 = 1.0 + std::cos(2.0 * theta_total);
  return z * z / n * (1.0 - (delta * delta + 1.0) * c2 / ((1.0 + x) * n));
}

double atomic_variance_optimal(double delta, double z, double x) {
  double n = 1.0 + delta * delta + z * z;
  return z * z / n * (1.0 - 2.0 * (delta * delta + 1.0) / ((1.0 + x) * n));
}

double squeezing_threshold(double delta, double x) {
  if (x >= 1.0) return 0.0;
  return (1.0 + delta * delta) * (1.0 - x) / (1.0 + x);
}

}  // namespace nanosq::emitter
