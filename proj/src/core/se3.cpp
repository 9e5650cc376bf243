#include "varsplat/core/se3.hpp"

#include <cmath>

namespace varsplat {

SE3Pose pose_compose(const SE3Pose& a, const SE3Pose& b) {
    SE3Pose out;
    out.rotation = (a.rotation * b.rotation).normalized();
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

SE3Pose pose_inverse(const SE3Pose& p) {
    SE3Pose out;
    out.rotation = p.rotation.conjugate();
    out.translation = -(out.rotation * p.translation);
    return out;
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

SE3Pose se3_exp(const Vec6& twist) {
    const Vec3 omega = twist.head<3>();
    const Vec3 v = twist.tail<3>();
    const double theta = omega.norm();

    SE3Pose out;
    if (theta < 1e-12) {
        // First-order rotation, translation passes through.
        out.rotation = Quat(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z()).normalized();
        out.translation = v + 0.5 * omega.cross(v);
        return out;
    }

    const Vec3 axis = omega / theta;
    const double half = 0.5 * theta;
    out.rotation = Quat(std::cos(half), std::sin(half) * axis.x(), std::sin(half) * axis.y(),
                        std::sin(half) * axis.z());

    const Mat3 w = skew(omega);
    const double a = (1.0 - std::cos(theta)) / (theta * theta);
    const double b = (theta - std::sin(theta)) / (theta * theta * theta);
    const Mat3 left_jacobian = Mat3::Identity() + a * w + b * (w * w);
    out.translation = left_jacobian * v;
    return out;
}

Vec6 se3_log(const SE3Pose& pose) {
    Quat q = pose.rotation.normalized();
    if (q.w() < 0.0) q.coeffs() *= -1.0;

    const double vec_norm = q.vec().norm();
    const double theta = 2.0 * std::atan2(vec_norm, q.w());

    Vec3 omega;
    if (vec_norm < 1e-12) {
        omega = 2.0 * q.vec();
    } else {
        omega = (theta / vec_norm) * q.vec();
    }

    const Mat3 w = skew(omega);
    Mat3 inv_left_jacobian;
    if (theta < 1e-6) {
        inv_left_jacobian = Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * (w * w);
    } else {
        // A = 1/theta^2 - cos(theta/2) / (2 theta sin(theta/2)); finite on (0, 2*pi).
        const double a =
            1.0 / (theta * theta) - std::cos(0.5 * theta) / (2.0 * theta * std::sin(0.5 * theta));
        inv_left_jacobian = Mat3::Identity() - 0.5 * w + a * (w * w);
    }

    Vec6 twist;
    twist.head<3>() = omega;
    twist.tail<3>() = inv_left_jacobian * pose.translation;
    return twist;
}

Eigen::Matrix<double, 6, 6> se3_adjoint(const SE3Pose& p) {
    const Mat3 r = p.rotation.toRotationMatrix();
    Eigen::Matrix<double, 6, 6> adj = Eigen::Matrix<double, 6, 6>::Zero();
    adj.block<3, 3>(0, 0) = r;
    adj.block<3, 3>(3, 3) = r;
    adj.block<3, 3>(3, 0) = skew(p.translation) * r;
    return adj;
}

double rotation_angle_between(const SE3Pose& a, const SE3Pose& b) {
    Quat rel = a.rotation.conjugate() * b.rotation;
    rel.normalize();
    const double w = std::min(1.0, std::abs(rel.w()));
    return 2.0 * std::acos(w);
}

}  // namespace varsplat
