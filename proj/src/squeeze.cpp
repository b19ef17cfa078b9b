#include "nanosqueeze/squeeze.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "nanosqueeze/constants.hpp"
#include "nanosqueeze/quadrature.hpp"

namespace nanosq::squeeze {

namespace {

void check_points(const emitter::Emitter& e, const green::SphereSystem& sys,
                  const Vec3& r) {
  if (!(e.omega_E > 0))
    throw std::invalid_argument("squeeze: emitter frequency must be positive");
  if ((r - e.position).norm() == 0.0)
    throw std::invalid_argument("squeeze: detection point coincides with the emitter");
  if (sys.radius > 0 &&
      (r.norm() <= sys.radius || e.position.norm() <= sys.radius))
    throw std::domain_error("squeeze: points must lie outside the sphere");
}

std::array<double, 3> to_spherical(const std::array<double, 3>& cart,
                                   const Vec3& r) {
  SphericalPoint sp = SphericalPoint::fromCartesian(r);
  CVec3 v{cart[0], cart[1], cart[2]};
  CVec3 s = green::to_spherical_components(v, sp);
  return {s.x.real(), s.y.real(), s.z.real()};
}

// G(r, r_E, omega) . d in Cartesian components, vacuum plus sphere part.
CVec3 green_dot_d(const green::SphereSystem& sys, const Vec3& r,
                  const Vec3& r_E, cplx omega, const Vec3& d,
                  double green_tol) {
  Mat3c g = green::free_space_green(r, r_E, omega);
  if (sys.radius > 0)
    g = g + green::scattered_green_adaptive(sys, r, r_E, omega, green_tol);
  return g.apply(d);
}

}  // namespace

std::array<double, 3> gamma_vector(const emitter::Emitter& e,
                                   const green::SphereSystem& sys,
                                   const Vec3& r, double green_tol) {
  check_points(e, sys, r);
  using namespace constants;
  const double wE = e.omega_E;
  Vec3 d = e.orientation.normalized() * e.dipole;
  CVec3 gd = green_dot_d(sys, r, e.position, wE, d, green_tol);
  double pref = 2.0 * wE * wE / (hbar * eps0 * c * c);
  return to_spherical({pref * gd.x.imag(), pref * gd.y.imag(),
                       pref * gd.z.imag()}, r);
}

std::array<double, 3> delta_omega_vector(const emitter::Emitter& e,
                                         const green::SphereSystem& sys,
                                         const Vec3& r, Mode mode,
                                         const PvSettings& pv) {
  check_points(e, sys, r);
  using namespace constants;
  const double wE = e.omega_E;
  const Vec3 d = e.orientation.normalized() * e.dipole;
  const double res_pref = -wE * wE / (hbar * eps0 * c * c);

  if (mode == Mode::far_field) {
    CVec3 gd = green_dot_d(sys, r, e.position, wE, d, pv.green_tol);
    return to_spherical({res_pref * gd.x.real(), res_pref * gd.y.real(),
                         res_pref * gd.z.real()}, r);
  }

  std::array<double, 3> cart{};

  // Vacuum part: the spectral density oscillates with the single phase
  // omega rho / c, so the real-axis principal value is evaluated directly
  // with pole subtraction and an averaged tail.
  const double rho = (r - e.position).norm();
  quad::PvOptions pvo;
  pvo.cutoff = pv.cutoff_factor * wE;
  pvo.half_period = pi * c / rho;
  pvo.head_intervals =
      std::max(64, 2 * (int)std::ceil(pvo.cutoff * rho / (pi * c)));
  pvo.rel_tol = pv.rel_tol;
  for (int j = 0; j < 3; ++j) {
    auto f = [&](double w) {
      Mat3c g0 = green::free_space_green(r, e.position, w);
      CVec3 gd = g0.apply(d);
      const cplx comp[3] = {gd.x, gd.y, gd.z};
      return w * w / (c * c) * comp[j].imag();
    };
    double p;
    try {
      p = quad::pv_oscillatory(f, wE, pvo);
    } catch (const quad::QuadratureError&) {
      throw quad::QuadratureError(
          "delta_omega_vector: vacuum principal-value integral did not settle "
          "(cutoff " + std::to_string(pv.cutoff_factor) + " omega_E, " +
          std::to_string(pvo.head_intervals) + " head intervals)");
    }
    // the denominator convention is (omega_E - omega)
    cart[j] = -p / (pi * hbar * eps0);
  }

  if (sys.radius > 0) {
    // Sphere part: resonant term plus the rotated-contour leg; the model
    // permittivity is analytic on the positive imaginary axis where the
    // integrand is real and smooth.
    Mat3c gs = green::scattered_green_adaptive(sys, r, e.position, wE,
                                               pv.green_tol);
    CVec3 gd = gs.apply(d);
    const cplx res[3] = {gd.x, gd.y, gd.z};
    for (int j = 0; j < 3; ++j) cart[j] += res_pref * res[j].real();

    // Substitution xi = xi_s u / (1 - u). xi_s tracks the quasistatic feature
    // width c / rho for distant detection points; the upper limit is set by
    // the evanescent suppression exp(-xi gap_sum / c) reaching 1e-20.
    double gap_sum = (r.norm() - sys.radius) +
                     (e.position.norm() - sys.radius);
    double xi_s = std::min(wE, 2.0 * c / gap_sum);
    double xi_max = std::max(30.0 * wE, 46.0 * c / gap_sum);
    double u_max = xi_max / (xi_s + xi_max);

    std::map<double, std::array<double, 3>> cache;
    auto gs_d = [&](double u) -> const std::array<double, 3>& {
      auto it = cache.find(u);
      if (it == cache.end()) {
        double xi = xi_s * u / (1.0 - u);
        std::array<double, 3> val{};
        try {
          Mat3c g = green::scattered_green_adaptive(sys, r, e.position,
                                                    cplx(0.0, xi),
                                                    pv.green_tol);
          CVec3 v = g.apply(d);
          val = {v.x.real(), v.y.real(), v.z.real()};
        } catch (const green::ConvergenceError&) {
          // deep in the evanescent tail the multipole series can exhaust its
          // order cap while the contribution is provably negligible
          if (std::exp(-xi * gap_sum / c) >= 1e-4) throw;
        }
        it = cache.emplace(u, val).first;
      }
      return it->second;
    };
    // The evanescent factor above is the worst case (conducting sphere); for
    // the dielectric-like response at large imaginary frequency the series
    // collapses much sooner, with a decay scale nearer r1 + r2 than the gap
    // sum. Probe the actual falloff and truncate once the integrand has
    // dropped ten orders of magnitude, which also sidesteps order-cap
    // exhaustion deep in the tail.
    {
      // start below omega_E: for grazing geometries the order cap can be
      // reached as early as xi ~ omega_E, and the decay must be established
      // from samples before that
      double s_ref = 0, s_prev = 0, s_prev2 = 0, xi_prev = 0;
      for (double f = 0.2; f * wE < xi_max; f *= 1.5) {
        double xi = f * wE;
        double u = xi / (xi_s + xi);
        double s;
        try {
          const auto& v = gs_d(u);
          s = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
        } catch (const green::ConvergenceError&) {
          // safe to stop early if the tail is already tiny, or in established
          // geometric decay with ratio q per step: the remaining mass is then
          // bounded by s_prev q / (1 - q)
          // a few-1e-3 bound on this leg perturbs |g| well below other
          // near-surface error sources; the alternative is a hard failure
          bool tiny = s_prev < 1e-6 * s_ref;
          double q = s_prev2 > 0 ? s_prev / s_prev2 : 1.0;
          bool decaying = q < 0.3 && s_prev * q / (1.0 - q) < 3e-3 * s_ref;
          if (s_ref > 0 && (tiny || decaying)) {
            u_max = xi_prev / (xi_s + xi_prev);
            break;
          }
          throw;
        }
        s_ref = std::max(s_ref, s);
        if (s_ref > 0 && s < 1e-10 * s_ref) {
          u_max = u;
          break;
        }
        s_prev2 = s_prev;
        s_prev = s;
        xi_prev = xi;
      }
    }
    quad::Options opt;
    opt.rel_tol = pv.rel_tol;
    for (int j = 0; j < 3; ++j) {
      auto integrand = [&](double u) {
        double xi = xi_s * u / (1.0 - u);
        double jac = xi_s / ((1.0 - u) * (1.0 - u));
        return xi * xi / (xi * xi + wE * wE) * gs_d(u)[j] * jac;
      };
      double rotated;
      try {
        rotated = quad::integrate(integrand, 0.0, u_max, opt);
      } catch (const quad::QuadratureError&) {
        throw quad::QuadratureError(
            "delta_omega_vector: imaginary-axis integral did not converge "
            "(xi_max / omega_E = " + std::to_string(xi_max / wE) + ")");
      }
      cart[j] += -wE / (pi * hbar * eps0 * c * c) * rotated;
    }
  }

  return to_spherical(cart, r);
}

FieldAmplitude field_amplitude(const emitter::Emitter& e,
                               const green::SphereSystem& sys, const Vec3& r,
                               Mode mode, const PvSettings& pv) {
  FieldAmplitude amp;
  amp.detection = r;
  amp.mode = mode;
  amp.gamma = gamma_vector(e, sys, r, pv.green_tol);
  amp.delta_omega = delta_omega_vector(e, sys, r, mode, pv);
  for (int i = 0; i < 3; ++i) {
    double re = -amp.delta_omega[i], im = 0.5 * amp.gamma[i];
    amp.magnitude[i] = constants::hbar * std::hypot(re, im);
    amp.phase[i] = std::atan2(im, re);
  }
  return amp;
}

VarianceResult field_variance(const FieldAmplitude& amp, int component,
                              double free_space_magnitude, double delta,
                              double z, double x,
                              std::optional<double> theta_total) {
  if (component < 0 || component > 2)
    throw std::invalid_argument("field_variance: component must be 0, 1 or 2");
  if (!(free_space_magnitude > 0))
    throw std::invalid_argument("field_variance: free-space magnitude must be positive");
  double g2 = amp.magnitude[component] * amp.magnitude[component];
  double atomic = theta_total
                      ? emitter::atomic_variance(delta, z, x, *theta_total)
                      : emitter::atomic_variance_optimal(delta, z, x);
  VarianceResult v;
  v.value = g2 * atomic;
  v.normalized = v.value / (free_space_magnitude * free_space_magnitude);
  v.squeezed = v.value < 0;
  return v;
}

double photocount_mean(const HomodyneConfig& cfg) {
  if (!(cfg.efficiency >= 0.0 && cfg.efficiency <= 1.0))
    throw std::invalid_argument("photocount_mean: efficiency must be in [0, 1]");
  if (cfg.window < 0)
    throw std::invalid_argument("photocount_mean: counting window must be >= 0");
  return cfg.efficiency * cfg.window * cfg.lo_amplitude * cfg.lo_amplitude;
}

HomodyneResult homodyne_signal(const VarianceResult& variance,
                               const HomodyneConfig& cfg,
                               double source_magnitude,
                               double excited_population) {
  HomodyneResult r;
  r.signal = cfg.efficiency * cfg.window * variance.value;
  double source = source_magnitude * source_magnitude * excited_population;
  double lo = cfg.lo_amplitude * cfg.lo_amplitude;
  r.valid = source <= kSourceCountFraction * lo;
  return r;
}

}  // namespace nanosq::squeeze
