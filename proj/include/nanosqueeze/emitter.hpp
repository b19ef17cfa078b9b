#pragma once

#include <utility>
#include <vector>

#include "nanosqueeze/green.hpp"

namespace nanosq::emitter {

// Two-level emitter. SI units throughout: position in meters, dipole in C m,
// rates in 1/s.
struct Emitter {
  Vec3 position;
  Vec3 orientation{0, 0, 1};  // unit vector
  double dipole = 1e-29;
  double omega_E = 0;
  double gamma_star = 0;  // pure dephasing
};

// Plane-wave drive. The incident field is unit amplitude; only the local
// enhancement ratio matters downstream.
struct Drive {
  Vec3 k_dir{1, 0, 0};
  Vec3 polarization{0, 0, 1};
};

struct QuadratureSettings {
  double rel_tol = 1e-9;
  double green_tol = 1e-9;  // adaptive Mie truncation tolerance
};

double free_space_decay_rate(const Emitter& e);
double decay_rate(const Emitter& e, const green::SphereSystem& sys);

// Dressed transition frequency. The free-space self-energy is absorbed into
// the observed omega_E, so only the sphere-scattered principal-value
// contribution is evaluated (contour rotation to the imaginary axis plus the
// resonant real-axis term).
double lamb_shift(const Emitter& e, const green::SphereSystem& sys,
                  const QuadratureSettings& q = {});

// d.E_local / d.E_incident at the emitter position (Omega / Omega_0).
cplx rabi_enhancement(const Emitter& e, const green::SphereSystem& sys,
                      const Drive& drive);

enum class DetuningReference {
  dressed,  // delta_0 axis referenced to the dressed frequency
  bare,     // referenced to the bare omega_E; the Lamb shift enters delta
};

struct DressedRates {
  double gamma = 0;        // total decay rate
  double gamma_0 = 0;      // free-space rate
  double omega_E = 0;      // bare frequency
  double omega_tilde = 0;  // dressed frequency
  cplx rabi{1.0, 0.0};     // Omega / Omega_0
  double x = 0;            // 2 gamma* / gamma
  double omega_L = 0;
  double delta_L = 0;  // omega_L - omega_tilde
  double delta = 0;    // 2 delta_L / (gamma + 2 gamma*)
  double z = 0;        // sqrt(2)|Omega| / sqrt(gamma (gamma + 2 gamma*))
  double phi_L = 0;    // drive phase at the emitter
};

// (delta, z) from the free-space normalized drive (delta_0, z_0).
std::pair<double, double> normalized_params(double delta0, double z0,
                                            const DressedRates& d,
                                            DetuningReference ref);

DressedRates dressed_rates(const Emitter& e, const green::SphereSystem& sys,
                           const Drive& drive, double delta0, double z0,
                           DetuningReference ref = DetuningReference::dressed,
                           const QuadratureSettings& q = {});

struct BlochState {
  cplx sigma_s;          // slow coherence expectation
  double sigma_z_s = -1;
  double phi_dep = 0;
};

BlochState bloch_steady_state(double delta, double z, double x, double phi_L);

struct BlochTrajectory {
  std::vector<double> t;  // units of 1 / gamma
  std::vector<cplx> sigma;
  std::vector<double> sigma_z;
};

// Fixed-step explicit RK4 in units gamma = 1. Throws std::invalid_argument if
// dt does not resolve the fastest rate (dt * max rate >= 0.1).
BlochTrajectory bloch_transient(double delta, double z, double x, double phi_L,
                                cplx sigma0, double sigma_z0, double t_end,
                                double dt);

// Normally-ordered atomic quadrature variance at the collected phase
// Theta_total (the formula uses cos(2 Theta_total)).
double atomic_variance(double delta, double z, double x, double theta_total);
// Optimal quadrature: the cosine set to one.
double atomic_variance_optimal(double delta, double z, double x);

// z^2 below which the optimal-phase variance is negative; 0 for x >= 1.
double squeezing_threshold(double delta, double x);

}  // namespace nanosq::emitter
