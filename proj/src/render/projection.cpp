#include "varsplat/render/projection.hpp"

#include <cmath>

namespace varsplat {

std::optional<Projected2D> project_gaussian(const Splat& splat, const SE3Pose& view,
                                            const CameraIntrinsics& intr) {
    const SE3Pose cam_from_world = pose_inverse(view);
    const Mat3 r_cw = cam_from_world.rotation.toRotationMatrix();
    const Vec3 x_cam = r_cw * splat.mean + cam_from_world.translation;

    const double z = x_cam.z();
    if (!std::isfinite(z) || z <= kNearPlane) return std::nullopt;

    const double inv_z = 1.0 / z;
    const Vec2 mean2d(intr.fx * x_cam.x() * inv_z + intr.cx,
                      intr.fy * x_cam.y() * inv_z + intr.cy);

    Eigen::Matrix<double, 2, 3> jac;
    jac << intr.fx * inv_z, 0.0, -intr.fx * x_cam.x() * inv_z * inv_z,
           0.0, intr.fy * inv_z, -intr.fy * x_cam.y() * inv_z * inv_z;

    const Mat3 sigma = covariance_from_scale_rotation(splat.scale(), splat.rotation);
    const Mat3 sigma_cam = r_cw * sigma * r_cw.transpose();
    Mat2 cov2d = jac * sigma_cam * jac.transpose();
    cov2d(0, 0) += kLowPassFloor;
    cov2d(1, 1) += kLowPassFloor;

    Projected2D out;
    out.mean2d = mean2d;
    out.cov2d = cov2d;
    out.z_cam = z;
    out.x_cam = x_cam;
    out.opacity_act = splat.opacity();

    const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    if (!cov2d.allFinite() || !mean2d.allFinite() || det <= 1e-12) {
        // Non-invertible after the floor: keep the splat so rasterize() can
        // report it as corrupt instead of silently culling.
        out.conic.setZero();
        out.radius_px = -1.0;
        return out;
    }

    const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    const double disc = std::sqrt(std::max(0.0, mid * mid - det));
    const double radius = kFootprintSigma * std::sqrt(mid + disc);
    out.radius_px = radius;

    if (mean2d.x() + radius < 0.0 || mean2d.x() - radius > intr.width - 1 ||
        mean2d.y() + radius < 0.0 || mean2d.y() - radius > intr.height - 1) {
        return std::nullopt;
    }

    const double inv_det = 1.0 / det;
    out.conic << cov2d(1, 1) * inv_det, -cov2d(0, 1) * inv_det,
                 -cov2d(1, 0) * inv_det, cov2d(0, 0) * inv_det;
    return out;
}

}  // namespace varsplat
