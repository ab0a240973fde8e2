#pragma once

// Rotation representations, symmetric-axis error metrics, quaternion
// averaging, pinhole projection and rigid transform helpers.
//
// Everything here is a pure function on Eigen values, templated on the
// scalar type. Angles are radians.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>

#include "trocar_dock/errors.hpp"

namespace trocar_dock {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using RotationMatrix = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using UnitQuaternion = Eigen::Quaternion<Scalar>;
template <typename Scalar>
using RigidTransform = Eigen::Transform<Scalar, 3, Eigen::Isometry>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using Vec6 = Vector6<double>;
using Mat3 = RotationMatrix<double>;
using Quat = UnitQuaternion<double>;
using Pose = RigidTransform<double>;

template <typename Scalar>
inline constexpr Scalar kNormEpsilon = Scalar(1e-12);
template <typename Scalar>
inline constexpr Scalar kParallelEpsilon = Scalar(1e-6);

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}
template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

/// Six-value rotation encoding [R_Z | R_Y]: the third and second columns of
/// a rotation matrix, in that order.
template <typename Scalar>
struct Rotation6D {
  Vector6<Scalar> coeffs = Vector6<Scalar>::Zero();

  Rotation6D() = default;
  explicit Rotation6D(const Vector6<Scalar>& c) : coeffs(c) {}
  Rotation6D(const Vector3<Scalar>& z_part, const Vector3<Scalar>& y_part) {
    coeffs << z_part, y_part;
  }

  Vector3<Scalar> z_part() const { return coeffs.template head<3>(); }
  Vector3<Scalar> y_part() const { return coeffs.template tail<3>(); }
};
using Rot6 = Rotation6D<double>;

template <typename Scalar>
struct AngularError {
  Scalar theta{0};  // radians, [0, pi]
  Scalar degrees() const { return rad_to_deg(theta); }
};

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{1000};
  Scalar fy{1000};
  Scalar cx{640};
  Scalar cy{360};
  int width{1280};
  int height{720};

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width && cy >= 0 &&
           cy < height;
  }
  bool contains(const Vector2<Scalar>& px) const {
    return px.x() >= 0 && px.x() < width && px.y() >= 0 && px.y() < height;
  }
};
using Intrinsics = CameraIntrinsics<double>;

template <typename Scalar>
struct Ray {
  Vector3<Scalar> origin = Vector3<Scalar>::Zero();
  Vector3<Scalar> direction = Vector3<Scalar>::UnitZ();  // unit

  Vector3<Scalar> at(Scalar s) const { return origin + s * direction; }
  Scalar distance_to(const Vector3<Scalar>& p) const {
    const Vector3<Scalar> d = p - origin;
    return (d - d.dot(direction) * direction).norm();
  }
};
using Ray3 = Ray<double>;

template <typename Derived>
Vector3<typename Derived::Scalar> normalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (!(n > kNormEpsilon<Scalar>)) {
    throw DegenerateInput("normalize: vector norm below epsilon");
  }
  return v / n;
}

template <typename Scalar>
bool is_rotation(const RotationMatrix<Scalar>& r, Scalar tol = Scalar(1e-9)) {
  return (r.transpose() * r - RotationMatrix<Scalar>::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - Scalar(1)) <= tol;
}

template <typename Scalar>
Rotation6D<Scalar> rot_to_6d(const RotationMatrix<Scalar>& r) {
  return Rotation6D<Scalar>(r.col(2), r.col(1));
}

/// Decodes [r1 | r2]: Z = normalize(r1), Y = Gram-Schmidt of r2 against Z,
/// X = Y x Z. Exact inverse of rot_to_6d on valid encodings.
template <typename Scalar>
RotationMatrix<Scalar> sixd_to_rot(const Rotation6D<Scalar>& v) {
  const Vector3<Scalar> r1 = v.z_part();
  const Vector3<Scalar> r2 = v.y_part();
  if (!(r1.norm() > kNormEpsilon<Scalar>) || !(r2.norm() > kNormEpsilon<Scalar>)) {
    throw DegenerateInput("sixd_to_rot: zero-length half");
  }
  const Vector3<Scalar> z = r1 / r1.norm();
  const Vector3<Scalar> y_raw = r2 - r2.dot(z) * z;
  if (!(y_raw.norm() > kParallelEpsilon<Scalar> * r2.norm())) {
    throw DegenerateInput("sixd_to_rot: halves are parallel");
  }
  const Vector3<Scalar> y = y_raw / y_raw.norm();
  RotationMatrix<Scalar> r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

namespace detail {
template <typename Derived>
void require_unit(const Eigen::MatrixBase<Derived>& v, const char* what) {
  using Scalar = typename Derived::Scalar;
  if (!(std::abs(v.norm() - Scalar(1)) <= Scalar(1e-6))) {
    throw PreconditionError(what);
  }
}
}  // namespace detail

/// Angle between two symmetry axes; blind to rotation about either axis.
template <typename Scalar>
AngularError<Scalar> axis_angle_error(const Vector3<Scalar>& z_gt, const Vector3<Scalar>& z_pred) {
  detail::require_unit(z_gt, "axis_angle_error: ground-truth axis is not unit length");
  detail::require_unit(z_pred, "axis_angle_error: predicted axis is not unit length");
  const Scalar c = std::clamp(z_gt.dot(z_pred), Scalar(-1), Scalar(1));
  return {std::acos(c)};
}

/// Mean squared componentwise difference of two unit axes, (2 - 2 cos)/3.
template <typename Scalar>
Scalar z_mse_loss(const Vector3<Scalar>& z_gt, const Vector3<Scalar>& z_pred) {
  detail::require_unit(z_gt, "z_mse_loss: ground-truth axis is not unit length");
  detail::require_unit(z_pred, "z_mse_loss: predicted axis is not unit length");
  return (z_gt - z_pred).squaredNorm() / Scalar(3);
}

/// w >= 0; for w == 0 the first nonzero of (x, y, z) is positive.
template <typename Scalar>
UnitQuaternion<Scalar> canonical_sign(const UnitQuaternion<Scalar>& q) {
  const Scalar comps[4] = {q.w(), q.x(), q.y(), q.z()};
  for (Scalar c : comps) {
    if (c > 0) return q;
    if (c < 0) return UnitQuaternion<Scalar>(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

/// Dominant eigenvector of sum(q q^T) over the inputs, sign-canonicalized.
/// Insensitive to the sign of any input.
template <typename Scalar>
UnitQuaternion<Scalar> average_quaternions(std::span<const UnitQuaternion<Scalar>> qs) {
  if (qs.empty()) {
    throw EmptyInput("average_quaternions: empty input");
  }
  Eigen::Matrix<Scalar, 4, 4> accum = Eigen::Matrix<Scalar, 4, 4>::Zero();
  for (const auto& q : qs) {
    const Eigen::Matrix<Scalar, 4, 1> v(q.w(), q.x(), q.y(), q.z());
    accum.noalias() += v * v.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 4, 4>> solver(accum);
  const Eigen::Matrix<Scalar, 4, 1> top = solver.eigenvectors().col(3).normalized();
  return canonical_sign(UnitQuaternion<Scalar>(top(0), top(1), top(2), top(3)));
}

/// Roll-free rotation taking +Z onto `axis`. The antipodal axis maps to a
/// half turn about X.
template <typename Scalar>
UnitQuaternion<Scalar> quaternion_from_z_axis(const Vector3<Scalar>& axis) {
  const Vector3<Scalar> a = normalize(axis);
  const Scalar w = Scalar(1) + a.z();
  if (w <= kNormEpsilon<Scalar>) {
    return UnitQuaternion<Scalar>(Scalar(0), Scalar(1), Scalar(0), Scalar(0));
  }
  UnitQuaternion<Scalar> q(w, -a.y(), a.x(), Scalar(0));
  q.normalize();
  return q;
}

template <typename Scalar>
Vector3<Scalar> z_axis_of(const UnitQuaternion<Scalar>& q) {
  return q.toRotationMatrix().col(2);
}

template <typename Scalar>
Vector2<Scalar> project(const CameraIntrinsics<Scalar>& k, const Vector3<Scalar>& p_cam) {
  if (!(p_cam.z() > 0)) {
    throw BehindCamera("project: point is not in front of the camera");
  }
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

/// Viewing ray through a pixel, in the camera frame.
template <typename Scalar>
Ray<Scalar> backproject_ray(const CameraIntrinsics<Scalar>& k, const Vector2<Scalar>& px) {
  if (!k.contains(px)) {
    throw OutOfBounds("backproject_ray: pixel outside the image");
  }
  const Vector3<Scalar> d((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, Scalar(1));
  return {Vector3<Scalar>::Zero(), d.normalized()};
}

template <typename Scalar>
RigidTransform<Scalar> make_transform(const RotationMatrix<Scalar>& r, const Vector3<Scalar>& t) {
  RigidTransform<Scalar> out = RigidTransform<Scalar>::Identity();
  out.linear() = r;
  out.translation() = t;
  return out;
}

template <typename Scalar>
RigidTransform<Scalar> compose(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
RigidTransform<Scalar> invert(const RigidTransform<Scalar>& a) {
  return a.inverse(Eigen::Isometry);
}

/// Frame at `eye` whose +Z looks at `target`; +X follows `x_hint` as closely
/// as possible.
template <typename Scalar>
RigidTransform<Scalar> look_at(const Vector3<Scalar>& eye, const Vector3<Scalar>& target,
                               const Vector3<Scalar>& x_hint) {
  const Vector3<Scalar> z = normalize(target - eye);
  const Vector3<Scalar> y = normalize(z.cross(x_hint));
  RotationMatrix<Scalar> r;
  r.col(0) = y.cross(z);
  r.col(1) = y;
  r.col(2) = z;
  return make_transform(r, eye);
}

/// Rotation with +Z along `z`, X completed from the world axis least aligned
/// with it.
template <typename Scalar>
RotationMatrix<Scalar> frame_from_z(const Vector3<Scalar>& z_axis) {
  const Vector3<Scalar> z = normalize(z_axis);
  Eigen::Index i = 0;
  z.cwiseAbs().minCoeff(&i);
  const Vector3<Scalar> hint = Vector3<Scalar>::Unit(i);
  const Vector3<Scalar> x = normalize(hint - hint.dot(z) * z);
  RotationMatrix<Scalar> r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return r;
}

/// Any unit vector orthogonal to `v`.
template <typename Scalar>
Vector3<Scalar> any_orthogonal(const Vector3<Scalar>& v) {
  return frame_from_z(v).col(0);
}

}  // namespace trocar_dock
