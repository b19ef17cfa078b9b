#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace nanosq::specfun {

using cplx = std::complex<double>;

inline constexpr int kMaxOrder = 700;

// Complex number stored as man * 2^exp. Keeps Mie series well defined where
// the individual radial functions overflow or underflow a double (large order
// at small argument, large imaginary argument) while their products stay
// moderate.
struct Scaled {
  cplx man{0.0, 0.0};
  long exp = 0;

  void normalize();
  cplx value() const;  // collapses to double range, 0 / inf on over-range
  bool isZero() const { return man == cplx(0.0, 0.0); }

  static Scaled from(cplx v);
  Scaled operator*(const Scaled& o) const;
  Scaled operator*(cplx s) const;
  Scaled operator/(const Scaled& o) const;
  Scaled operator+(const Scaled& o) const;
  Scaled operator-(const Scaled& o) const;
};

// e^{i z} with the exponent carried separately.
Scaled scaled_exp_i(cplx z);

// j_n and h1_n for all orders 0..nmax. j uses downward (Miller) recurrence
// normalized against closed forms, h uses upward recurrence from h_0.
// Throws std::invalid_argument for nmax < 0 or nmax > kMaxOrder, and
// std::domain_error for z == 0 in the Hankel ladder.
std::vector<Scaled> sph_bessel_j_ladder(int nmax, cplx z);
std::vector<Scaled> sph_hankel1_ladder(int nmax, cplx z);

// Plain-double entry points (overflow guard: throws std::overflow_error if
// the result leaves double range).
cplx sph_bessel_j(int n, cplx z);
cplx sph_bessel_y(int n, cplx z);
cplx sph_hankel1(int n, cplx z);

struct RiccatiPair {
  cplx value;
  cplx derivative;
};

// psi_n(z) = z j_n(z), xi_n(z) = z h1_n(z), with derivatives.
struct RiccatiFunctions {
  RiccatiPair psi;
  RiccatiPair xi;
};
RiccatiFunctions riccati_functions(int n, cplx z);

struct ScaledRiccati {
  Scaled value;
  Scaled derivative;
};
// Ladders over 1..nmax (index n), from the Bessel ladders.
std::vector<ScaledRiccati> riccati_psi_ladder(int nmax, cplx z);
std::vector<ScaledRiccati> riccati_xi_ladder(int nmax, cplx z);

// Classic Mie angular functions, m = 1 unnormalized:
// pi_n = P_n^1/sin(theta), tau_n = dP_n^1/dtheta. Arrays indexed 0..nmax.
void mie_angular_ladder(int nmax, double cos_theta, std::vector<double>& pi_n,
                        std::vector<double>& tau_n);
struct MieAngular {
  double pi_n;
  double tau_n;
};
MieAngular mie_angular(int n, double cos_theta);

// Semi-normalized associated Legendre trio for the vector-wave series,
// Pb_n^m = sqrt((n-m)!/(n+m)!) P_n^m (no Condon-Shortley phase):
//   P   = Pb_n^m(cos theta)
//   pi  = m Pb_n^m / sin(theta)      (regular at the poles)
//   tau = d Pb_n^m / d theta
// Vectors indexed by n in 0..nmax; entries with n < m are zero.
struct LegendreTrio {
  std::vector<double> P, pi, tau;
};
LegendreTrio legendre_trio(int nmax, int m, double cos_theta);

}  // namespace nanosq::specfun
