#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace nanosq {

using cplx = std::complex<double>;

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return {x / n, y / n, z / n};
  }
};

struct CVec3 {
  cplx x{0, 0}, y{0, 0}, z{0, 0};

  CVec3 operator+(const CVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  CVec3 operator*(cplx s) const { return {x * s, y * s, z * s}; }
  cplx dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
};

// 3x3 complex matrix, row major.
struct Mat3c {
  std::array<cplx, 9> a{};

  cplx& operator()(int i, int j) { return a[3 * i + j]; }
  const cplx& operator()(int i, int j) const { return a[3 * i + j]; }

  Mat3c operator+(const Mat3c& o) const {
    Mat3c r;
    for (int i = 0; i < 9; ++i) r.a[i] = a[i] + o.a[i];
    return r;
  }
  Mat3c operator*(cplx s) const {
    Mat3c r;
    for (int i = 0; i < 9; ++i) r.a[i] = a[i] * s;
    return r;
  }
  CVec3 apply(const Vec3& v) const {
    return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
            a[3] * v.x + a[4] * v.y + a[5] * v.z,
            a[6] * v.x + a[7] * v.y + a[8] * v.z};
  }
  Mat3c transpose() const {
    Mat3c r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  Mat3c imagPart() const {
    Mat3c r;
    for (int i = 0; i < 9; ++i) r.a[i] = cplx(a[i].imag(), 0.0);
    return r;
  }
  Mat3c realPart() const {
    Mat3c r;
    for (int i = 0; i < 9; ++i) r.a[i] = cplx(a[i].real(), 0.0);
    return r;
  }
  double maxAbs() const {
    double m = 0;
    for (const auto& v : a) m = std::max(m, std::abs(v));
    return m;
  }
  static Mat3c identity() {
    Mat3c r;
    r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
    return r;
  }
  static Mat3c outer(const Vec3& u, const Vec3& v) {
    Mat3c r;
    const double uu[3] = {u.x, u.y, u.z}, vv[3] = {v.x, v.y, v.z};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = uu[i] * vv[j];
    return r;
  }
};

// Spherical coordinates about the sphere center (origin), physics convention:
// theta from +z, phi from +x in the xy-plane.
struct SphericalPoint {
  double r = 0, theta = 0, phi = 0;

  Vec3 toCartesian() const {
    return {r * std::sin(theta) * std::cos(phi),
            r * std::sin(theta) * std::sin(phi), r * std::cos(theta)};
  }
  static SphericalPoint fromCartesian(const Vec3& v) {
    SphericalPoint p;
    p.r = v.norm();
    p.theta = (p.r > 0) ? std::acos(std::clamp(v.z / p.r, -1.0, 1.0)) : 0.0;
    p.phi = std::atan2(v.y, v.x);
    return p;
  }
  Vec3 unitR() const {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
            std::cos(theta)};
  }
  Vec3 unitTheta() const {
    return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi),
            -std::sin(theta)};
  }
  Vec3 unitPhi() const { return {-std::sin(phi), std::cos(phi), 0.0}; }
};

}  // namespace nanosq
