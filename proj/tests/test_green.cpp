#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nanosqueeze/constants.hpp"
#include "nanosqueeze/green.hpp"

using namespace nanosq;
using namespace nanosq::green;

namespace {

constexpr cplx I{0.0, 1.0};

double mat_relerr(const Mat3c& got, const Mat3c& want) {
  double num = 0, den = 0;
  for (int i = 0; i < 9; ++i) {
    num = std::max(num, std::abs(got.a[i] - want.a[i]));
    den = std::max(den, std::abs(want.a[i]));
  }
  return num / std::max(den, 1e-300);
}

SphereSystem gold_sphere(double radius_nm) {
  SphereSystem s;
  s.radius = radius_nm * nm;
  s.material = materials::default_gold();
  return s;
}

}  // namespace

TEST_CASE("free-space dyadic: symmetry, transversality at large distance") {
  double omega = wavelength_nm_to_omega(550);
  Vec3 r1{30 * nm, -10 * nm, 55 * nm}, r2{-5 * nm, 70 * nm, 12 * nm};
  Mat3c g12 = free_space_green(r1, r2, omega);
  Mat3c g21 = free_space_green(r2, r1, omega);
  CHECK(mat_relerr(g12, g21.transpose()) < 1e-13);

  // far zone: G ~ (I - R^ R^) e^{ikR}/(4 pi R), transverse to R^
  Vec3 rf{2e-3, 1e-3, 0.5e-3};
  Mat3c gf = free_space_green(rf, {0, 0, 0}, omega);
  CVec3 along = gf.apply(rf.normalized());
  double scale = gf.maxAbs();
  CHECK(std::abs(along.x) / scale < 1e-3);
  CHECK(std::abs(along.y) / scale < 1e-3);
  CHECK(std::abs(along.z) / scale < 1e-3);
}

TEST_CASE("free-space imaginary part approaches the coincidence limit") {
  double omega = wavelength_nm_to_omega(550);
  double want = free_space_im_coincident(omega);
  CHECK(want == doctest::Approx(omega / (6 * constants::pi * constants::c)));
  Mat3c g = free_space_green({0, 0, 1e-12}, {0, 0, 0}, omega);
  for (int i = 0; i < 3; ++i) {
    CHECK(g(i, i).imag() == doctest::Approx(want).epsilon(1e-6));
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(std::abs(g(i, j)) / want < 1e-6);
  }
  CHECK_THROWS_AS((void)free_space_green({1, 2, 3}, {1, 2, 3}, omega),
                  std::domain_error);
}

TEST_CASE("free-space dyadic on the imaginary frequency axis is real") {
  cplx omega{0.0, wavelength_nm_to_omega(550)};
  Mat3c g = free_space_green({40 * nm, 0, 30 * nm}, {0, 10 * nm, -20 * nm}, omega);
  for (int i = 0; i < 9; ++i) CHECK(std::abs(g.a[i].imag()) / g.maxAbs() < 1e-14);
}

TEST_CASE("vector-wave expansion rebuilds the free-space dyadic") {
  double omega = wavelength_nm_to_omega(550);
  SUBCASE("generic off-axis points") {
    Vec3 r1{20 * nm, 35 * nm, 90 * nm}, r2{-30 * nm, 40 * nm, 20 * nm};
    Mat3c series = free_space_green_series(r1, r2, omega, 40);
    Mat3c closed = free_space_green(r1, r2, omega);
    CHECK(mat_relerr(series, closed) < 1e-8);
  }
  SUBCASE("one point on the polar axis") {
    Vec3 r1{0, 0, 70 * nm}, r2{25 * nm, -15 * nm, 30 * nm};
    Mat3c series = free_space_green_series(r1, r2, omega, 60);
    Mat3c closed = free_space_green(r1, r2, omega);
    CHECK(mat_relerr(series, closed) < 1e-8);
  }
  SUBCASE("both points on axis") {
    Vec3 r1{0, 0, 120 * nm}, r2{0, 0, 65 * nm};
    Mat3c series = free_space_green_series(r1, r2, omega, 60);
    Mat3c closed = free_space_green(r1, r2, omega);
    CHECK(mat_relerr(series, closed) < 1e-8);
  }
  SUBCASE("argument order does not matter") {
    Vec3 r1{0, 0, 120 * nm}, r2{25 * nm, 0, 30 * nm};
    Mat3c a = free_space_green_series(r1, r2, omega, 40);
    Mat3c b = free_space_green_series(r2, r1, omega, 40).transpose();
    CHECK(mat_relerr(a, b) < 1e-10);
  }
}

TEST_CASE("dipole Mie coefficient matches the quasistatic polarizability") {
  auto sys = gold_sphere(5);
  double omega = wavelength_nm_to_omega(550);
  cplx eps = sphere_permittivity(sys, omega);
  double x = omega * sys.radius / constants::c;
  cplx want = (2.0 * I / 3.0) * x * x * x * (eps - 1.0) / (eps + 2.0);
  auto c = mie_reflection_coefficients(sys, 1, omega);
  CHECK(std::abs(c.B_N - want) / std::abs(want) < 2e-2);
  // magnetic dipole response of a tiny sphere is much weaker
  CHECK(std::abs(c.B_M) < 0.05 * std::abs(c.B_N));
}

TEST_CASE("cross sections: quasistatic limit and extinction >= scattering") {
  auto tiny = gold_sphere(4);
  double omega = wavelength_nm_to_omega(600);
  double k = omega / constants::c;
  cplx eps = sphere_permittivity(tiny, omega);
  cplx ratio = (eps - 1.0) / (eps + 2.0);
  double csca_qs = (8.0 * constants::pi / 3.0) * std::pow(k, 4) *
                   std::pow(tiny.radius, 6) * std::norm(ratio);
  auto cs = mie_cross_sections(tiny, omega);
  CHECK(cs.scattering == doctest::Approx(csca_qs).epsilon(0.03));
  CHECK(cs.extinction > cs.scattering);

  auto big = gold_sphere(60);
  auto cs2 = mie_cross_sections(big, wavelength_nm_to_omega(550));
  CHECK(cs2.extinction >= cs2.scattering);
  CHECK(cs2.scattering > 0);
}

TEST_CASE("scattered dyadic: small sphere behaves as a point polarizability") {
  auto sys = gold_sphere(5);
  double omega = wavelength_nm_to_omega(550);
  double k = omega / constants::c;
  cplx eps = sphere_permittivity(sys, omega);
  cplx alpha = 4.0 * constants::pi * std::pow(sys.radius, 3) * (eps - 1.0) / (eps + 2.0);

  Vec3 r1{0, 0, 32 * nm}, r2{18 * nm, 8 * nm, 25 * nm};
  Mat3c gs = scattered_green(sys, r1, r2, omega, 12);
  Mat3c g10 = free_space_green(r1, {0, 0, 0}, omega);
  Mat3c g02 = free_space_green({0, 0, 0}, r2, omega);
  Mat3c want;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cplx s = 0;
      for (int l = 0; l < 3; ++l) s += g10(i, l) * g02(l, j);
      want(i, j) = k * k * alpha * s;
    }
  CHECK(mat_relerr(gs, want) < 0.05);
}

TEST_CASE("scattered dyadic reciprocity and axis consistency") {
  auto sys = gold_sphere(60);
  double omega = wavelength_nm_to_omega(550);
  Vec3 r1{0, 0, 70 * nm}, r2{30 * nm, -20 * nm, 75 * nm};
  Mat3c a = scattered_green(sys, r1, r2, omega, 60);
  Mat3c b = scattered_green(sys, r2, r1, omega, 60).transpose();
  CHECK(mat_relerr(a, b) < 1e-10);

  // rotating both points about z by the same angle must conjugate the tensor
  // by the rotation (checked on the zz component, which is invariant)
  double ang = 0.83;
  auto rot = [&](const Vec3& v) {
    return Vec3{v.x * std::cos(ang) - v.y * std::sin(ang),
                v.x * std::sin(ang) + v.y * std::cos(ang), v.z};
  };
  Mat3c c = scattered_green(sys, rot(r1), rot(r2), omega, 60);
  CHECK(std::abs(c(2, 2) - a(2, 2)) / std::abs(a(2, 2)) < 1e-10);
}

TEST_CASE("no scatterer means no scattered part") {
  SphereSystem empty;
  Mat3c g = scattered_green(empty, {0, 0, 50 * nm}, {0, 0, 60 * nm},
                            wavelength_nm_to_omega(550), 10);
  CHECK(g.maxAbs() == 0.0);
  int n_used = 123;
  Mat3c ga = scattered_green_adaptive(empty, {0, 0, 50 * nm}, {0, 0, 60 * nm},
                                      wavelength_nm_to_omega(550), 1e-9, &n_used);
  CHECK(ga.maxAbs() == 0.0);
  CHECK(n_used == 0);
}

TEST_CASE("interior points are rejected") {
  auto sys = gold_sphere(60);
  double omega = wavelength_nm_to_omega(550);
  CHECK_THROWS_AS((void)scattered_green(sys, {0, 0, 50 * nm}, {0, 0, 80 * nm}, omega, 10),
                  std::domain_error);
  CHECK_THROWS_AS(
      (void)plane_wave_local_field(sys, {1, 0, 0}, {0, 0, 1}, {0, 0, 10 * nm}, omega),
      std::domain_error);
}

TEST_CASE("adaptive truncation matches a deep fixed-order sum") {
  auto sys = gold_sphere(60);
  double omega = wavelength_nm_to_omega(550);
  Vec3 r1{0, 0, 70 * nm}, r2{0, 0, 72 * nm};
  int n_used = 0;
  Mat3c ga = scattered_green_adaptive(sys, r1, r2, omega, 1e-9, &n_used);
  CHECK(n_used > 5);
  Mat3c gf = scattered_green(sys, r1, r2, omega, std::min(kOrderCap, n_used + 60));
  CHECK(mat_relerr(ga, gf) < 1e-6);

  // tighter gap needs more multipoles
  int deep = truncation_order(sys, {0, 0, 68 * nm}, {0, 0, 68 * nm}, omega, 1e-7);
  int shallow = truncation_order(sys, {0, 0, 120 * nm}, {0, 0, 120 * nm}, omega, 1e-7);
  CHECK(deep > shallow);
  CHECK(truncation_order(sys, r1, r2, omega, 1.0) == 1);
}

TEST_CASE("scattered dyadic on the imaginary axis is real and decaying") {
  auto sys = gold_sphere(60);
  double w0 = wavelength_nm_to_omega(550);
  Vec3 r{0, 0, 70 * nm};
  double prev = 1e300;
  for (double f : {0.2, 1.0, 5.0, 20.0}) {
    Mat3c g = scattered_green(sys, r, r, cplx(0.0, f * w0), 40);
    for (int i = 0; i < 9; ++i)
      CHECK(std::abs(g.a[i].imag()) <= 1e-12 * std::max(g.maxAbs(), 1e-300));
    double zz = std::abs(g(2, 2));
    CHECK(zz < prev);
    prev = zz;
  }
}

TEST_CASE("plane-wave local field: limits and quasistatic oracle") {
  double omega = wavelength_nm_to_omega(550);
  double k = omega / constants::c;
  SphereSystem empty;
  CVec3 e = plane_wave_local_field(empty, {1, 0, 0}, {0, 0, 1}, {25 * nm, 3 * nm, -8 * nm}, omega);
  cplx want = std::exp(I * (k * 25 * nm));
  CHECK(std::abs(e.z - want) < 1e-13);
  CHECK(std::abs(e.x) < 1e-13);
  CHECK(std::abs(e.y) < 1e-13);

  CHECK_THROWS_AS(
      (void)plane_wave_local_field(empty, {1, 0, 0}, {1, 0, 0}, {0, 0, 0}, omega),
      std::invalid_argument);

  // small sphere: total field = incident + field of the induced dipole
  auto sys = gold_sphere(5);
  cplx eps = sphere_permittivity(sys, omega);
  cplx alpha = 4.0 * constants::pi * std::pow(sys.radius, 3) * (eps - 1.0) / (eps + 2.0);
  Vec3 r{0, 0, 22 * nm};
  CVec3 got = plane_wave_local_field(sys, {1, 0, 0}, {0, 0, 1}, r, omega);
  Mat3c g = free_space_green(r, {0, 0, 0}, omega);
  CVec3 dip = g.apply({0, 0, 1});  // incident amplitude at center is z^
  cplx pref = k * k * alpha;
  // r sits at x = 0, so the incident field there is just z^
  CVec3 want_v{pref * dip.x, pref * dip.y, 1.0 + pref * dip.z};
  double scale = std::max({std::abs(want_v.x), std::abs(want_v.y), std::abs(want_v.z)});
  CHECK(std::abs(got.x - want_v.x) / scale < 0.03);
  CHECK(std::abs(got.y - want_v.y) / scale < 0.03);
  CHECK(std::abs(got.z - want_v.z) / scale < 0.03);
}

TEST_CASE("local field intensity is strongest against the polarization axis") {
  // for z-polarized light the near-field hot spots sit at the z poles
  auto sys = gold_sphere(60);
  double omega = wavelength_nm_to_omega(550);
  auto inten = [&](Vec3 r) {
    CVec3 e = plane_wave_local_field(sys, {1, 0, 0}, {0, 0, 1}, r, omega);
    return std::norm(e.x) + std::norm(e.y) + std::norm(e.z);
  };
  double pole = inten({0, 0, 70 * nm});
  double waist = inten({0, 70 * nm, 0});
  CHECK(pole > 2.0 * waist);
  CHECK(pole > 1.0);  // enhancement, not shadowing, at 550 nm
}

TEST_CASE("spherical component projection") {
  SphericalPoint p{1.0, 0.5, 1.2};
  CVec3 v{cplx(0.3, 0.1), cplx(-0.2, 0.4), cplx(0.9, -0.5)};
  CVec3 s = to_spherical_components(v, p);
  // rebuild the Cartesian vector from the projections
  Vec3 er = p.unitR(), et = p.unitTheta(), ep = p.unitPhi();
  CVec3 back{s.x * er.x + s.y * et.x + s.z * ep.x,
             s.x * er.y + s.y * et.y + s.z * ep.y,
             s.x * er.z + s.y * et.z + s.z * ep.z};
  CHECK(std::abs(back.x - v.x) < 1e-14);
  CHECK(std::abs(back.y - v.y) < 1e-14);
  CHECK(std::abs(back.z - v.z) < 1e-14);
}
