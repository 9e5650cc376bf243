#include "varsplat/grad/backward.hpp"

#include <cmath>

#include "varsplat/core/errors.hpp"
#include "varsplat/core/types.hpp"

namespace varsplat {

namespace {

constexpr int kShards = 16;        // fixed, so accumulation order never depends on thread count
constexpr int kProjStride = 13;    // mean2d(2) cov(3) z(1) color(3) sigma2(3) opacity(1)

struct PixelScratch {
    std::vector<double> w, t, a, g, gain, qx, qy;
    std::vector<char> clamped;
    explicit PixelScratch(int cap)
        : w(cap), t(cap), a(cap), g(cap), gain(cap), qx(cap), qy(cap), clamped(cap) {}
};

// dR/dq for a unit quaternion (w,x,y,z), standard 3DGS expressions.
void quat_rotation_jacobians(const Quat& q, Mat3 jac[4]) {
    const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
    jac[0] << 0, -z, y,
              z, 0, -x,
             -y, x, 0;
    jac[1] << 0, y, z,
              y, -2 * x, -w,
              z, w, -2 * x;
    jac[2] << -2 * y, x, w,
              x, 0, z,
             -w, z, -2 * y;
    jac[3] << -2 * z, -w, x,
              w, -2 * z, y,
              x, y, 0;
    for (int i = 0; i < 4; ++i) jac[i] *= 2.0;
}

}  // namespace

bool GradientBundle::all_finite() const {
    for (size_t i = 0; i < size(); ++i) {
        if (!d_mean[i].allFinite() || !d_rotation[i].allFinite() || !d_log_scale[i].allFinite() ||
            !std::isfinite(d_opacity_logit[i]) || !d_color[i].allFinite() ||
            !d_log_variance[i].allFinite()) {
            return false;
        }
    }
    return d_pose.allFinite();
}

GradientBundle backward_rasterize(const std::vector<Splat>& splats, const RenderOutput& output,
                                  const ImageD& d_color, const ImageD& d_depth,
                                  const ImageD& d_variance, int threads) {
    if (!output.ctx || output.ctx->contributors.cap == 0) {
        throw MissingContributors("render output was produced without retain_contributors");
    }
    const RasterContext& ctx = *output.ctx;
    const int w = ctx.intr.width;
    const int h = ctx.intr.height;
    const size_t num_proj = ctx.projected.size();

    GradientBundle bundle(splats.size());
    if (num_proj == 0) return bundle;

    const bool has_dc = !d_color.empty();
    const bool has_dd = !d_depth.empty();
    const bool has_dv = !d_variance.empty();

    // Phase A: accumulate adjoints in projected space (mean2d, cov2d, z_cam,
    // color, sigma^2, activated opacity), sharded by pixel row.
    std::vector<std::vector<double>> shard_acc(
        kShards, std::vector<double>(num_proj * kProjStride, 0.0));

    const int cap = ctx.contributors.cap;
    parallel_for_shards(kShards, threads, [&](int shard) {
        std::vector<double>& acc = shard_acc[shard];
        PixelScratch scratch(cap);
        for (int py = shard; py < h; py += kShards) {
            for (int px = 0; px < w; ++px) {
                const size_t pixel = static_cast<size_t>(py) * w + px;
                const int count = ctx.contributors.counts[pixel];
                if (count == 0) continue;

                const Vec3 dc = has_dc ? Vec3(d_color.at(px, py, 0), d_color.at(px, py, 1),
                                              d_color.at(px, py, 2))
                                       : Vec3::Zero();
                const double dd = has_dd ? d_depth.at(px, py) : 0.0;
                const Vec3 dv = has_dv ? Vec3(d_variance.at(px, py, 0), d_variance.at(px, py, 1),
                                              d_variance.at(px, py, 2))
                                       : Vec3::Zero();
                if (dc.isZero(0.0) && dd == 0.0 && dv.isZero(0.0)) continue;

                const Vec3 pixel_color(output.color.at(px, py, 0), output.color.at(px, py, 1),
                                       output.color.at(px, py, 2));

                // Replay the forward composite to recover w_i, T_i exactly.
                double transmittance = 1.0;
                double total_gain_w = 0.0;
                for (int i = 0; i < count; ++i) {
                    const uint32_t pos = ctx.contributors.entries[pixel * cap + i];
                    const Projected2D& g = ctx.projected[pos];
                    const double ddx = px - g.mean2d.x();
                    const double ddy = py - g.mean2d.y();
                    const double mahal = g.conic(0, 0) * ddx * ddx +
                                         2.0 * g.conic(0, 1) * ddx * ddy +
                                         g.conic(1, 1) * ddy * ddy;
                    const double gauss = std::exp(-0.5 * mahal);
                    double a = g.opacity_act * gauss;
                    const bool clamped = a > kMaxEffectiveAlpha;
                    if (clamped) a = kMaxEffectiveAlpha;

                    scratch.t[i] = transmittance;
                    scratch.a[i] = a;
                    scratch.g[i] = gauss;
                    scratch.w[i] = transmittance * a;
                    scratch.qx[i] = g.conic(0, 0) * ddx + g.conic(0, 1) * ddy;
                    scratch.qy[i] = g.conic(1, 0) * ddx + g.conic(1, 1) * ddy;
                    scratch.clamped[i] = clamped;

                    const Splat& s = splats[g.splat_index];
                    const Vec3 var = s.app_variance();
                    double gain = dc.dot(s.color) + dd * g.z_cam;
                    for (int m = 0; m < 3; ++m) {
                        gain += dv[m] * (var[m] + s.color[m] * s.color[m] -
                                         2.0 * pixel_color[m] * s.color[m]);
                    }
                    scratch.gain[i] = gain;
                    total_gain_w += gain * scratch.w[i];
                    transmittance *= (1.0 - a);
                }

                // Suffix sums turn dL/dw into dL/dalpha.
                double suffix = total_gain_w;
                for (int i = 0; i < count; ++i) {
                    const uint32_t pos = ctx.contributors.entries[pixel * cap + i];
                    const Projected2D& g = ctx.projected[pos];
                    const Splat& s = splats[g.splat_index];
                    const double wi = scratch.w[i];
                    double* slot = acc.data() + static_cast<size_t>(pos) * kProjStride;

                    // Color and sigma^2 adjoints.
                    for (int m = 0; m < 3; ++m) {
                        slot[6 + m] +=
                            wi * (dc[m] + 2.0 * dv[m] * (s.color[m] - pixel_color[m]));
                        slot[9 + m] += wi * dv[m];
                    }
                    slot[5] += dd * wi;  // z_cam

                    suffix -= scratch.gain[i] * wi;
                    const double d_alpha =
                        scratch.gain[i] * scratch.t[i] - suffix / (1.0 - scratch.a[i]);

                    if (!scratch.clamped[i]) {
                        slot[12] += d_alpha * scratch.g[i];  // activated opacity
                        const double d_gauss = d_alpha * ctx.projected[pos].opacity_act;
                        const double d_mahal = -0.5 * scratch.g[i] * d_gauss;
                        // mahal = d^T M d with d = p - mean2d, M = conic.
                        slot[0] += -2.0 * d_mahal * scratch.qx[i];
                        slot[1] += -2.0 * d_mahal * scratch.qy[i];
                        // cov2d adjoint via M = cov2d^-1: -(M d)(M d)^T * d_mahal.
                        slot[2] += -d_mahal * scratch.qx[i] * scratch.qx[i];
                        slot[3] += -d_mahal * scratch.qx[i] * scratch.qy[i];
                        slot[4] += -d_mahal * scratch.qy[i] * scratch.qy[i];
                    }
                }
            }
        }
    });

    // Reduce shards in fixed order.
    std::vector<double>& acc = shard_acc[0];
    for (int s = 1; s < kShards; ++s) {
        const std::vector<double>& src = shard_acc[s];
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
    }

    // Phase B: chain projected-space adjoints through the EWA projection to
    // splat parameters and the pose twist.
    const SE3Pose cam_from_frame = pose_inverse(ctx.view);
    const Mat3 r_cw = cam_from_frame.rotation.toRotationMatrix();
    const double fx = ctx.intr.fx, fy = ctx.intr.fy;

    std::vector<Vec6> pose_contrib(num_proj, Vec6::Zero());
    parallel_for_shards(static_cast<int>((num_proj + 255) / 256), threads, [&](int shard) {
        const size_t begin = static_cast<size_t>(shard) * 256;
        const size_t end = std::min(num_proj, begin + 256);
        for (size_t pos = begin; pos < end; ++pos) {
            const double* slot = acc.data() + pos * kProjStride;
            const Projected2D& proj = ctx.projected[pos];
            const int k = proj.splat_index;
            const Splat& s = splats[k];

            const Vec2 d_mean2d(slot[0], slot[1]);
            Mat2 d_cov2d;
            d_cov2d << slot[2], slot[3], slot[3], slot[4];
            const double d_z = slot[5];
            const Vec3 d_col(slot[6], slot[7], slot[8]);
            const Vec3 d_sig(slot[9], slot[10], slot[11]);
            const double d_opa = slot[12];

            bundle.d_color[k] = d_col;
            const Vec3 var = s.app_variance();
            bundle.d_log_variance[k] = d_sig.cwiseProduct(var);
            const double o = proj.opacity_act;
            bundle.d_opacity_logit[k] = d_opa * o * (1.0 - o);

            // Recompute forward projection internals.
            const Vec3 xc = proj.x_cam;
            const double z = xc.z();
            const double inv_z = 1.0 / z;
            Eigen::Matrix<double, 2, 3> jac;
            jac << fx * inv_z, 0.0, -fx * xc.x() * inv_z * inv_z,
                   0.0, fy * inv_z, -fy * xc.y() * inv_z * inv_z;
            const Quat q_unit = s.rotation.normalized();
            const Mat3 r_splat = q_unit.toRotationMatrix();
            const Vec3 scale = s.scale();
            const Vec3 s2 = scale.array().square();
            const Mat3 sigma = r_splat * s2.asDiagonal() * r_splat.transpose();
            const Mat3 sigma_cam = r_cw * sigma * r_cw.transpose();

            // cov2d = J sigma_cam J^T + floor.
            const Eigen::Matrix<double, 2, 3> d_jac = 2.0 * d_cov2d * jac * sigma_cam;
            const Mat3 d_sigma_cam = jac.transpose() * d_cov2d * jac;

            Vec3 d_xc = jac.transpose() * d_mean2d;
            d_xc.z() += d_z;
            const double inv_z2 = inv_z * inv_z;
            d_xc.x() += d_jac(0, 2) * (-fx * inv_z2);
            d_xc.y() += d_jac(1, 2) * (-fy * inv_z2);
            d_xc.z() += d_jac(0, 0) * (-fx * inv_z2) + d_jac(1, 1) * (-fy * inv_z2) +
                        d_jac(0, 2) * (2.0 * fx * xc.x() * inv_z2 * inv_z) +
                        d_jac(1, 2) * (2.0 * fy * xc.y() * inv_z2 * inv_z);

            // sigma_cam = R_cw sigma R_cw^T.
            const Mat3 d_sigma = r_cw.transpose() * d_sigma_cam * r_cw;
            const Mat3 d_rcw = 2.0 * d_sigma_cam * r_cw * sigma;

            bundle.d_mean[k] = r_cw.transpose() * d_xc;

            // sigma = R_q diag(s^2) R_q^T.
            const Mat3 d_rq = 2.0 * d_sigma * r_splat * s2.asDiagonal();
            const Vec3 d_s2 = (r_splat.transpose() * d_sigma * r_splat).diagonal();
            bundle.d_log_scale[k] = 2.0 * d_s2.cwiseProduct(s2);

            Mat3 quat_jac[4];
            quat_rotation_jacobians(q_unit, quat_jac);
            Vec4 d_q;
            for (int j = 0; j < 4; ++j) d_q[j] = (d_rq.cwiseProduct(quat_jac[j])).sum();
            Vec4 qv(q_unit.w(), q_unit.x(), q_unit.y(), q_unit.z());
            bundle.d_rotation[k] = d_q - qv * qv.dot(d_q);

            // Pose twist, left perturbation exp(xi) * view:
            //   X_cam(xi) = R_cw (Y - omega x Y - v) + t_cw, with Y the splat
            //   mean in the view frame, and the rotation acting on the
            //   covariance perturbs as R_cw * exp(-omega^).
            const Vec3 rt_dxc = r_cw.transpose() * d_xc;
            Vec6 twist;
            twist.tail<3>() = -rt_dxc;
            twist.head<3>() = -s.mean.cross(rt_dxc);
            const Mat3 b = r_cw.transpose() * d_rcw;
            twist[0] -= b(2, 1) - b(1, 2);
            twist[1] -= b(0, 2) - b(2, 0);
            twist[2] -= b(1, 0) - b(0, 1);
            pose_contrib[pos] = twist;
        }
    });

    for (const Vec6& t : pose_contrib) bundle.d_pose += t;
    return bundle;
}

}  // namespace varsplat
