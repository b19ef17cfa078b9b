#pragma once

#include <array>
#include <optional>

#include "nanosqueeze/emitter.hpp"
#include "nanosqueeze/green.hpp"

namespace nanosq::squeeze {

// How the principal-value frequency integral behind delta_omega is handled.
// far_field keeps only the resonant Re G term; full adds the off-resonant
// contribution (vacuum part on the real axis with pole subtraction, sphere
// part rotated to the imaginary axis).
enum class Mode { far_field, full };

struct PvSettings {
  double cutoff_factor = 20.0;  // real-axis cutoff in units of omega_E
  double rel_tol = 1e-8;        // quadrature targets
  double green_tol = 1e-9;      // adaptive Mie truncation tolerance
};

// Source-field coupling at a detection point, spherical components
// (r, theta, phi) about the sphere center. The complex amplitude is
// g_i = hbar(-delta_omega_i + i gamma_i / 2) = |g_i| e^{i phi_i}.
struct FieldAmplitude {
  Vec3 detection;
  Mode mode = Mode::far_field;
  std::array<double, 3> gamma{};        // [1/s]
  std::array<double, 3> delta_omega{};  // [1/s]
  std::array<double, 3> magnitude{};    // |g_i| [V/m]
  std::array<double, 3> phase{};        // [rad], quadrant-correct
};

// (2 omega_E^2 / hbar eps0 c^2) Im{G(r, r_E, omega_E) . d}, spherical
// components at r. Requires r and r_E exterior and distinct.
std::array<double, 3> gamma_vector(const emitter::Emitter& e,
                                   const green::SphereSystem& sys,
                                   const Vec3& r, double green_tol = 1e-9);

std::array<double, 3> delta_omega_vector(const emitter::Emitter& e,
                                         const green::SphereSystem& sys,
                                         const Vec3& r, Mode mode,
                                         const PvSettings& pv = {});

FieldAmplitude field_amplitude(const emitter::Emitter& e,
                               const green::SphereSystem& sys, const Vec3& r,
                               Mode mode, const PvSettings& pv = {});

struct VarianceResult {
  double value = 0;       // <:(Delta E_i)^2:> [V^2/m^2]
  double normalized = 0;  // value / |g_i0|^2
  bool squeezed = false;  // value < 0
};

// <:(Delta E_i)^2:> = |g_i|^2 <:(Delta sigma)^2:>, an exact factorization.
// theta_total is the full phase argument of the atomic quadrature (detector
// quadrature + phi_i + phi_L + phi_dep - omega_L t); omitted, the optimal
// quadrature (cosine set to one) is reported. free_space_magnitude is |g_i0|
// from the same geometry with the sphere removed.
VarianceResult field_variance(const FieldAmplitude& amp, int component,
                              double free_space_magnitude, double delta,
                              double z, double x,
                              std::optional<double> theta_total = std::nullopt);

struct HomodyneConfig {
  double efficiency = 1.0;  // xi in (0, 1]
  double window = 0;        // counting interval Delta t [s]
  double lo_amplitude = 0;  // local oscillator |alpha| [V/m]
  double lo_phase = 0;      // phi_L at the detector
  double quadrature = 0;    // detector quadrature angle Theta
};

// Source photocounts above this fraction of the laser counts invalidate the
// strong-local-oscillator assumption behind the homodyne formula.
inline constexpr double kSourceCountFraction = 0.01;

// Laser-dominated mean photocount xi Delta t |alpha|^2.
double photocount_mean(const HomodyneConfig& cfg);

struct HomodyneResult {
  double signal = 0;   // (variance of counts - mean) / mean
  bool valid = true;
};

// (Delta n^2 - nbar)/nbar = xi Delta t <:(Delta E)^2:> at the quadrature
// -phi_L + omega_L t. source_magnitude is |g_i| at the detector and
// excited_population is <sigma^dag sigma>; together they set the validity
// flag. An invalid configuration still returns the value.
HomodyneResult homodyne_signal(const VarianceResult& variance,
                               const HomodyneConfig& cfg,
                               double source_magnitude,
                               double excited_population);

}  // namespace nanosq::squeeze
