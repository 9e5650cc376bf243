#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace varsplat {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Rigid transform x_out = q * x_in + t.
struct SE3Pose {
    Quat rotation{1.0, 0.0, 0.0, 0.0};
    Vec3 translation{0.0, 0.0, 0.0};

    static SE3Pose identity() { return SE3Pose{}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.block<3, 3>(0, 0) = rotation.toRotationMatrix();
        m.block<3, 1>(0, 3) = translation;
        return m;
    }
};

// Applies b first, then a.
SE3Pose pose_compose(const SE3Pose& a, const SE3Pose& b);
SE3Pose pose_inverse(const SE3Pose& p);

// Twist layout: [rotation (3), translation (3)].
SE3Pose se3_exp(const Vec6& twist);
Vec6 se3_log(const SE3Pose& pose);

Mat3 skew(const Vec3& v);

// Adjoint with twist layout [rotation; translation]:
// T * exp(xi) * T^-1 == exp(Adj(T) * xi).
Eigen::Matrix<double, 6, 6> se3_adjoint(const SE3Pose& p);

// Geodesic rotation angle between two poses, in radians.
double rotation_angle_between(const SE3Pose& a, const SE3Pose& b);

}  // namespace varsplat
