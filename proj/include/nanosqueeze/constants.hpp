#pragma once

namespace nanosq {

// CODATA 2018 values, SI units.
namespace constants {
inline constexpr double c = 299792458.0;          // speed of light [m/s]
inline constexpr double hbar = 1.054571817e-34;   // reduced Planck constant [J s]
inline constexpr double eps0 = 8.8541878128e-12;  // vacuum permittivity [F/m]
inline constexpr double pi = 3.14159265358979323846;
}  // namespace constants

// All lengths are meters internally; configs accept nm and convert here.
inline constexpr double nm = 1e-9;

inline double wavelength_nm_to_omega(double lambda_nm) {
  return 2.0 * constants::pi * constants::c / (lambda_nm * nm);
}

inline double omega_to_wavelength_nm(double omega) {
  return 2.0 * constants::pi * constants::c / omega / nm;
}

}  // namespace nanosq
