#include "dim/rotation.hpp"

#include <cmath>
#include <stdexcept>

namespace dim {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Mat3 Mat3::axis_rotation(int axis, double radians) {
  double c = std::cos(radians), s = std::sin(radians);
  Mat3 r;
  switch (axis) {
    case 0:
      r.m = {1, 0, 0, 0, c, -s, 0, s, c};
      break;
    case 1:
      r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
      break;
    case 2:
      r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
      break;
    default:
      throw std::invalid_argument("axis must be 0, 1 or 2");
  }
  return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
      r(i, j) = s;
    }
  return r;
}

Vec3 Mat3::operator*(const Vec3& v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
  return r;
}

double frobenius_distance(const Mat3& a, const Mat3& b) {
  double s = 0;
  for (int i = 0; i < 9; ++i) {
    double d = a.m[static_cast<size_t>(i)] - b.m[static_cast<size_t>(i)];
    s += d * d;
  }
  return std::sqrt(s);
}

Mat3 euler_to_matrix(const std::array<double, 3>& radians,
                     const std::array<int, 3>& order) {
  return Mat3::axis_rotation(order[0], radians[0]) *
         Mat3::axis_rotation(order[1], radians[1]) *
         Mat3::axis_rotation(order[2], radians[2]);
}

namespace {

// Permutation parity of a Tait-Bryan axis order (all axes distinct).
double order_parity(const std::array<int, 3>& order) {
  if (order[0] == order[1] || order[1] == order[2] || order[0] == order[2])
    throw std::invalid_argument("euler order must use three distinct axes");
  bool even = (order[1] == (order[0] + 1) % 3);
  return even ? 1.0 : -1.0;
}

double clamp1(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

std::array<double, 3> matrix_to_euler(const Mat3& r, const std::array<int, 3>& order) {
  int i = order[0], j = order[1], k = order[2];
  double eps = order_parity(order);
  double s2 = clamp1(eps * r(i, k));
  std::array<double, 3> out{};
  out[1] = std::asin(s2);
  if (std::abs(s2) < 1.0 - 1e-10) {
    out[0] = std::atan2(-eps * r(j, k), r(k, k));
    out[2] = std::atan2(-eps * r(i, j), r(i, i));
  } else {
    // Gimbal: the outer angles degenerate to one. Fold theta3 into theta1 by
    // peeling the fixed middle rotation off and reading the remaining
    // rotation about axis i from R * Rj(theta2)^T.
    out[2] = 0.0;
    Mat3 m = r * Mat3::axis_rotation(j, out[1]).transposed();
    int u = (i + 1) % 3, v = (i + 2) % 3;
    out[0] = std::atan2(m(v, u), m(u, u));
  }
  return out;
}

Vec3 matrix_to_expmap(const Mat3& r) {
  // Through the quaternion (Shepperd's method): stable for all angles.
  double t = r(0, 0) + r(1, 1) + r(2, 2);
  double w, x, y, z;
  if (t > 0) {
    double s = std::sqrt(t + 1.0) * 2.0;
    w = 0.25 * s;
    x = (r(2, 1) - r(1, 2)) / s;
    y = (r(0, 2) - r(2, 0)) / s;
    z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    w = (r(2, 1) - r(1, 2)) / s;
    x = 0.25 * s;
    y = (r(0, 1) + r(1, 0)) / s;
    z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    w = (r(0, 2) - r(2, 0)) / s;
    x = (r(0, 1) + r(1, 0)) / s;
    y = 0.25 * s;
    z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    w = (r(1, 0) - r(0, 1)) / s;
    x = (r(0, 2) + r(2, 0)) / s;
    y = (r(1, 2) + r(2, 1)) / s;
    z = 0.25 * s;
  }
  if (w < 0) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
  double vnorm = std::sqrt(x * x + y * y + z * z);
  double theta = 2.0 * std::atan2(vnorm, w);
  if (vnorm < 1e-12) return {2.0 * x, 2.0 * y, 2.0 * z};
  double scale = theta / vnorm;
  return {x * scale, y * scale, z * scale};
}

Mat3 expmap_to_matrix(const Vec3& e) {
  double theta = e.norm();
  Mat3 r = Mat3::identity();
  if (theta < 1e-12) {
    // first-order terms in the raw vector keep tiny rotations exact enough
    r(0, 1) -= e.z;
    r(0, 2) += e.y;
    r(1, 0) += e.z;
    r(1, 2) -= e.x;
    r(2, 0) -= e.y;
    r(2, 1) += e.x;
    return r;
  }
  // R = I + sin(theta) K + (1-cos(theta)) K^2 with K = skew(e/theta)
  double kx = e.x / theta, ky = e.y / theta, kz = e.z / theta;
  double a = std::sin(theta), b = 1.0 - std::cos(theta);
  double kxx = kx * kx, kyy = ky * ky, kzz = kz * kz;
  r(0, 0) = 1.0 - b * (kyy + kzz);
  r(0, 1) = -a * kz + b * kx * ky;
  r(0, 2) = a * ky + b * kx * kz;
  r(1, 0) = a * kz + b * kx * ky;
  r(1, 1) = 1.0 - b * (kxx + kzz);
  r(1, 2) = -a * kx + b * ky * kz;
  r(2, 0) = -a * ky + b * kx * kz;
  r(2, 1) = a * kx + b * ky * kz;
  r(2, 2) = 1.0 - b * (kxx + kyy);
  return r;
}

Vec3 expmap_nearest(const Vec3& e, const Vec3& prev) {
  double theta = e.norm();
  Vec3 axis;
  if (theta < 1e-12) {
    // Identity rotation: the axis is free, so keep winding along the
    // previous one (2*pi*k representatives of the identity).
    double pn = prev.norm();
    if (pn < 1e-12) return e;
    axis = prev * (1.0 / pn);
    theta = 0.0;
  } else {
    axis = e * (1.0 / theta);
  }
  Vec3 best = e;
  double best_d2 = -1.0;
  for (int k = -2; k <= 2; ++k) {
    double t = theta + 2.0 * M_PI * static_cast<double>(k);
    Vec3 cand = axis * t;
    Vec3 d = cand - prev;
    double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
    if (best_d2 < 0 || d2 < best_d2) {
      best_d2 = d2;
      best = cand;
    }
  }
  return best;
}

}  // namespace dim
