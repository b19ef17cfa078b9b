#pragma once

#include <stdexcept>
#include <vector>

#include "nanosqueeze/geometry.hpp"
#include "nanosqueeze/materials.hpp"
#include "nanosqueeze/specfun.hpp"

namespace nanosq::green {

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gold nanosphere centered at the origin in vacuum. radius in meters;
// radius == 0 means no scatterer.
struct SphereSystem {
  double radius = 0.0;
  materials::DrudeLorentzModel material;
};

inline constexpr int kOrderCap = specfun::kMaxOrder;

// Relative permittivity at real omega or on the positive imaginary axis
// (omega = i xi). Other complex frequencies are not supported.
cplx sphere_permittivity(const SphereSystem& sys, cplx omega);

// Vacuum dyadic, convention G = [I + grad grad / k^2] e^{ikR}/(4 pi R),
// units 1/m; Im G_ii(r,r) -> omega/(6 pi c).
Mat3c free_space_green(const Vec3& r1, const Vec3& r2, cplx omega);
double free_space_im_coincident(double omega);  // omega/(6 pi c)

struct MieCoefficients {
  int n = 0;
  cplx B_M;  // magnetic (TE) exterior reflection coefficient, -b_n of Mie
  cplx B_N;  // electric (TM) exterior reflection coefficient, -a_n of Mie
};

MieCoefficients mie_reflection_coefficients(const SphereSystem& sys, int n,
                                            double omega);

// Scaled ladders for series work (indices 1..nmax; entry 0 unused).
struct MieLadders {
  std::vector<specfun::Scaled> B_M, B_N;
};
MieLadders mie_ladders(const SphereSystem& sys, int nmax, cplx omega);

// Sphere-scattered part of the Green tensor for both points outside,
// Cartesian components, truncated at n_max. omega may be real or i xi.
Mat3c scattered_green(const SphereSystem& sys, const Vec3& r1, const Vec3& r2,
                      cplx omega, int n_max);

// As above, choosing the order adaptively; throws ConvergenceError if the
// order bound is hit before the tail drops below tol.
Mat3c scattered_green_adaptive(const SphereSystem& sys, const Vec3& r1,
                               const Vec3& r2, cplx omega, double tol,
                               int* n_used = nullptr);

// Smallest order with next-term relative contribution < tol; search bounded
// by a near-field-inflated Wiscombe estimate, capped at kOrderCap.
int truncation_order(const SphereSystem& sys, const Vec3& r1, const Vec3& r2,
                     double omega, double tol);

int wiscombe_bound(const SphereSystem& sys, const Vec3& r1, const Vec3& r2,
                   double omega);

// Free-space dyadic rebuilt from the vector-spherical-wave expansion
// (validation path for the series machinery; requires |r1| != |r2|).
Mat3c free_space_green_series(const Vec3& r1, const Vec3& r2, double omega,
                              int n_max);

// Total field (incident + Mie-scattered) at an exterior point for a
// unit-amplitude plane wave, Cartesian components.
CVec3 plane_wave_local_field(const SphereSystem& sys, const Vec3& k_dir,
                             const Vec3& polarization, const Vec3& r,
                             double omega);

struct CrossSections {
  double extinction = 0;  // [m^2]
  double scattering = 0;
};
CrossSections mie_cross_sections(const SphereSystem& sys, double omega);

// Spherical components (r, theta, phi) at point p of M v, where v is given in
// Cartesian components.
CVec3 to_spherical_components(const CVec3& v, const SphericalPoint& p);

}  // namespace nanosq::green
