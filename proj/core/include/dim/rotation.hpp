#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace dim {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const;
};

// Row-major 3x3 rotation matrix, column-vector convention (v' = R v).
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 axis_rotation(int axis, double radians);  // axis 0=X,1=Y,2=Z
  Mat3 operator*(const Mat3& o) const;
  Vec3 operator*(const Vec3& v) const;
  Mat3 transposed() const;
  double operator()(int r, int c) const { return m[static_cast<size_t>(r * 3 + c)]; }
  double& operator()(int r, int c) { return m[static_cast<size_t>(r * 3 + c)]; }
};

double frobenius_distance(const Mat3& a, const Mat3& b);

// Euler angles (radians) applied in the listed axis order, each about the
// current local frame: R = A(order[0], r0) * A(order[1], r1) * A(order[2], r2).
Mat3 euler_to_matrix(const std::array<double, 3>& radians,
                     const std::array<int, 3>& order);
std::array<double, 3> matrix_to_euler(const Mat3& r, const std::array<int, 3>& order);

// Axis-angle vector theta * n with theta in [0, pi]; robust near 0 and pi.
Vec3 matrix_to_expmap(const Mat3& r);
Mat3 expmap_to_matrix(const Vec3& e);

// Picks the 2*pi*k-shifted representative of `e` closest to `prev`, removing
// the only discontinuity in the axis-angle encoding.
Vec3 expmap_nearest(const Vec3& e, const Vec3& prev);

}  // namespace dim
