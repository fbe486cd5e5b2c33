#pragma once

// Linear and rotational algebra for the Cosserat functional: orthogonal matrix
// decomposition, the weighted operator P, the double cover S^3 -> SO(3) and
// the tangent-space geometry of SO(3).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>

#include "cosserat/error.hpp"

namespace cosserat {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

/// Frobenius inner product.
inline double frob_dot(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

inline Mat3 sym(const Mat3& a) { return 0.5 * (a + a.transpose()); }
inline Mat3 skew(const Mat3& a) { return 0.5 * (a - a.transpose()); }

/// Orthogonal split A = dev + skw + (tr/3) I with dev symmetric and trace free.
struct MatrixParts {
  Mat3 dev;
  Mat3 skw;
  double tr = 0.0;
};

inline MatrixParts decompose(const Mat3& a) {
  MatrixParts parts;
  parts.tr = a.trace();
  parts.dev = sym(a) - (parts.tr / 3.0) * Mat3::Identity();
  parts.skw = skew(a);
  return parts;
}

/// Which deviator enters P.
///
/// `trace_free` uses dev sym A = sym A - (tr A / 3) I, giving an orthogonal
/// split and |PA|^2 = mu_e|dev|^2 + mu_c|skw|^2 + 3 mu_0 (tr A)^2.
/// `full_trace` uses dev sym A = sym A - (tr A) I; under it P is the identity
/// when mu_e = mu_c = mu_0 = 1, which is the setting of the explicit singular
/// solution.
enum class DeviatorConvention { trace_free, full_trace };

struct MaterialParams {
  double mu_e = 1.0;
  double mu_c = 1.0;
  double mu_0 = 1.0;
  double p = 2.0;
  DeviatorConvention convention = DeviatorConvention::trace_free;

  void validate() const {
    if (!(mu_e > 0.0) || !(mu_c > 0.0) || !(mu_0 > 0.0)) {
      throw ConfigError("material constants mu_e, mu_c, mu_0 must all be > 0");
    }
    if (!(p >= 2.0)) {
      std::ostringstream os;
      os << "exponent p must satisfy p >= 2 (got " << p << ")";
      throw ConfigError(os.str());
    }
  }
};

/// PA = sqrt(mu_e) dev sym A + sqrt(mu_c) skew A + sqrt(mu_0) (tr A) I.
inline Mat3 apply_p(const Mat3& a, const MaterialParams& c) {
  const double tr = a.trace();
  const double shift = c.convention == DeviatorConvention::trace_free ? tr / 3.0 : tr;
  const Mat3 dev = sym(a) - shift * Mat3::Identity();
  return std::sqrt(c.mu_e) * dev + std::sqrt(c.mu_c) * skew(a) +
         std::sqrt(c.mu_0) * tr * Mat3::Identity();
}

/// P^2 as the literal composition of P with itself.
inline Mat3 apply_p2(const Mat3& a, const MaterialParams& c) { return apply_p(apply_p(a, c), c); }

// ---------------------------------------------------------------------------
// Rotations

/// Unit quaternion (w, x, y, z).
class UnitQuat {
 public:
  static constexpr double kUnitTol = 1e-12;

  UnitQuat() : q_(1.0, 0.0, 0.0, 0.0) {}

  /// Checked construction: |q| must be 1 within `tol`.
  static UnitQuat from(const Vec4& q, double tol = kUnitTol) {
    const double dev = std::abs(q.norm() - 1.0);
    if (!(dev <= tol)) {
      std::ostringstream os;
      os << "quaternion is not unit (|q| - 1 = " << q.norm() - 1.0 << ")";
      throw ValidationError(os.str());
    }
    return UnitQuat(q);
  }
  static UnitQuat from(double w, double x, double y, double z, double tol = kUnitTol) {
    return from(Vec4(w, x, y, z), tol);
  }
  /// Normalizes a nonzero 4-vector.
  static UnitQuat normalized(const Vec4& q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero quaternion");
    return UnitQuat(q / n);
  }

  const Vec4& coeffs() const { return q_; }
  double w() const { return q_[0]; }
  double x() const { return q_[1]; }
  double y() const { return q_[2]; }
  double z() const { return q_[3]; }

  UnitQuat operator-() const { return UnitQuat(-q_); }

  friend bool operator==(const UnitQuat& a, const UnitQuat& b) { return a.q_ == b.q_; }

 private:
  explicit UnitQuat(const Vec4& q) : q_(q) {}
  Vec4 q_;
};

/// Hamilton product of raw 4-vectors (w, x, y, z).
inline Vec4 quat_mul(const Vec4& a, const Vec4& b) {
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

inline UnitQuat operator*(const UnitQuat& a, const UnitQuat& b) {
  return UnitQuat::normalized(quat_mul(a.coeffs(), b.coeffs()));
}

/// Rotation matrix: R^t R = I and det R = 1.
class Rot {
 public:
  static constexpr double kTol = 1e-10;

  Rot() : r_(Mat3::Identity()) {}

  static Rot from(const Mat3& r) {
    const double orth = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = std::abs(r.determinant() - 1.0);
    if (!(orth <= kTol) || !(det <= kTol)) {
      throw ValidationError("matrix is not a rotation (R^t R != I or det R != 1)");
    }
    return Rot(r);
  }

  const Mat3& matrix() const { return r_; }
  operator const Mat3&() const { return r_; }  // NOLINT: rotations are matrices

 private:
  friend Rot cover_unchecked(const Vec4& q);
  explicit Rot(const Mat3& r) : r_(r) {}
  Mat3 r_;
};

/// The covering polynomial evaluated on any 4-vector. For unit input this is
/// the 2-to-1 map S^3 -> SO(3).
inline Mat3 cover_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * z * w, 2 * x * z + 2 * y * w,  //
      2 * x * y + 2 * z * w, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * x * w,   //
      2 * x * z - 2 * y * w, 2 * y * z + 2 * x * w, 1 - 2 * x * x - 2 * y * y;
  return r;
}

inline Rot cover_unchecked(const Vec4& q) { return Rot(cover_matrix(q)); }

/// Tolerance on |q| used by `cover`; larger deviations mean caller-side drift.
inline constexpr double kCoverUnitTol = 1e-8;

inline Rot cover(const Vec4& q) {
  if (!(std::abs(q.norm() - 1.0) <= kCoverUnitTol)) {
    throw ValidationError("cover: quaternion is not unit");
  }
  return cover_unchecked(q);
}
inline Rot cover(const UnitQuat& q) { return cover_unchecked(q.coeffs()); }

/// Partial derivatives of the covering polynomial: element c is dR/dq_c.
inline std::array<Mat3, 4> cover_jacobian(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -2 * z, 2 * y,  //
      2 * z, 0, -2 * x,      //
      -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,  //
      2 * y, -4 * x, -2 * w,  //
      2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,  //
      2 * x, 0, 2 * z,           //
      -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,  //
      2 * w, -4 * z, 2 * y,       //
      2 * x, 2 * y, 0;
  return d;
}

inline constexpr double kTangentTol = 1e-10;

/// Differential of the cover at q applied to a tangent vector v (v . q = 0).
inline Mat3 cover_differential(const UnitQuat& q, const Vec4& v) {
  if (!(std::abs(v.dot(q.coeffs())) <= kTangentTol)) {
    throw ValidationError("cover_differential: v is not tangent to S^3 at q");
  }
  const auto d = cover_jacobian(q.coeffs());
  return v[0] * d[0] + v[1] * d[1] + v[2] * d[2] + v[3] * d[3];
}

/// Projection onto T_R SO(3) = R so(3): returns R skew(R^t A).
inline Mat3 tangent_project(const Mat3& r, const Mat3& a) { return r * skew(r.transpose() * a); }

/// Projection of a 4-vector onto T_q S^3.
inline Vec4 sphere_project(const UnitQuat& q, const Vec4& v) {
  return v - v.dot(q.coeffs()) * q.coeffs();
}

/// Retraction on S^3: (q + v) / |q + v|.
inline UnitQuat retract(const UnitQuat& q, const Vec4& v) {
  if (v.isZero(0.0)) return q;
  const Vec4 s = q.coeffs() + v;
  const double n = s.norm();
  if (!(n > 1e-300) || !std::isfinite(n)) {
    throw DomainError("retract: q + v vanishes (step too long)");
  }
  return UnitQuat::normalized(s);
}

}  // namespace cosserat
