#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "varsplat/core/activation.hpp"
#include "varsplat/core/se3.hpp"
#include "varsplat/core/types.hpp"
#include "test_helpers.hpp"

using namespace varsplat;
using varsplat::testutil::random_pose;
using varsplat::testutil::random_unit_quat;

namespace {
double pose_diff(const SE3Pose& a, const SE3Pose& b) {
    return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}
}  // namespace

TEST_CASE("pose_compose identity and inverse") {
    std::mt19937 rng(7);
    const SE3Pose t = random_pose(rng);
    CHECK(pose_diff(pose_compose(t, SE3Pose::identity()), t) < 1e-15);
    CHECK(pose_diff(pose_compose(SE3Pose::identity(), t), t) < 1e-15);
    CHECK(pose_diff(pose_compose(t, pose_inverse(t)), SE3Pose::identity()) < 1e-12);
}

TEST_CASE("pose_compose matches homogeneous matrix product") {
    std::mt19937 rng(11);
    for (int i = 0; i < 100; ++i) {
        const SE3Pose a = random_pose(rng), b = random_pose(rng);
        const Eigen::Matrix4d expected = a.matrix() * b.matrix();
        CHECK((pose_compose(a, b).matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("pose_compose associative and inverse-consistent on 1000 samples") {
    std::mt19937 rng(13);
    for (int i = 0; i < 1000; ++i) {
        const SE3Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
        CHECK(pose_diff(pose_compose(pose_compose(a, b), c),
                        pose_compose(a, pose_compose(b, c))) < 1e-12);
        CHECK(pose_diff(pose_compose(a, pose_inverse(a)), SE3Pose::identity()) < 1e-12);
    }
}

TEST_CASE("se3 exp/log basics") {
    CHECK(pose_diff(se3_exp(Vec6::Zero()), SE3Pose::identity()) < 1e-15);

    Vec6 pure_trans;
    pure_trans << 0, 0, 0, 0.3, -0.2, 1.5;
    const SE3Pose p = se3_exp(pure_trans);
    CHECK(p.rotation.angularDistance(Quat::Identity()) < 1e-15);
    CHECK((p.translation - Vec3(0.3, -0.2, 1.5)).norm() < 1e-15);
}

TEST_CASE("se3 log(exp) round trip") {
    std::mt19937 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        Vec3 axis(n(rng), n(rng), n(rng));
        axis.normalize();
        Vec6 xi;
        xi.head<3>() = 0.5 * axis;  // rotation norm 0.5
        xi.tail<3>() = Vec3(n(rng), n(rng), n(rng));
        CHECK((se3_log(se3_exp(xi)) - xi).norm() < 1e-10);
    }
    // Large angles, short of pi.
    for (int i = 0; i < 200; ++i) {
        Vec3 axis(n(rng), n(rng), n(rng));
        axis.normalize();
        Vec6 xi;
        xi.head<3>() = 3.0 * axis;
        xi.tail<3>() = Vec3(n(rng), n(rng), n(rng));
        CHECK((se3_log(se3_exp(xi)) - xi).norm() < 1e-9);
    }
}

TEST_CASE("covariance from scale and rotation") {
    const Mat3 diag = covariance_from_scale_rotation(Vec3(1, 2, 3), Quat::Identity());
    CHECK((diag - Vec3(1, 4, 9).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-15);

    std::mt19937 rng(19);
    for (int i = 0; i < 50; ++i) {
        const Quat q = random_unit_quat(rng);
        const Mat3 iso = covariance_from_scale_rotation(Vec3::Constant(0.7), q);
        CHECK((iso - 0.49 * Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    }

    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int i = 0; i < 100; ++i) {
        Vec3 scale(u(rng), u(rng), u(rng));
        const Mat3 cov = covariance_from_scale_rotation(scale, random_unit_quat(rng));
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 expected = scale.array().square();
        std::sort(expected.data(), expected.data() + 3);
        CHECK((eig.eigenvalues() - expected).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("activations are bijective on their domains") {
    for (double x = 0.001; x < 0.999; x += 0.0017) {
        CHECK(sigmoid(logit(x)) == doctest::Approx(x).epsilon(1e-12));
    }
    for (double s = -6.0; s < 4.0; s += 0.13) {
        CHECK(std::log(activate_scale(s)) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("rotation angle between poses") {
    SE3Pose a;
    SE3Pose b;
    b.rotation = Quat(Eigen::AngleAxisd(0.7, Vec3::UnitY()));
    CHECK(rotation_angle_between(a, b) == doctest::Approx(0.7).epsilon(1e-12));
}
