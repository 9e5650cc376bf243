#include "varsplat/pipeline/metrics.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "varsplat/core/errors.hpp"
#include "varsplat/grad/losses.hpp"

namespace varsplat {

AteResult eval_ate(const Trajectory& estimated, const Trajectory& ground_truth, double max_dt) {
    // Nearest-timestamp association (both trajectories time-sorted).
    std::vector<std::pair<size_t, size_t>> assoc;
    size_t g = 0;
    for (size_t e = 0; e < estimated.poses.size(); ++e) {
        const double ts = estimated.poses[e].first;
        while (g + 1 < ground_truth.poses.size() &&
               std::abs(ground_truth.poses[g + 1].first - ts) <=
                   std::abs(ground_truth.poses[g].first - ts)) {
            ++g;
        }
        if (g < ground_truth.poses.size() &&
            std::abs(ground_truth.poses[g].first - ts) <= max_dt) {
            assoc.emplace_back(e, g);
        }
    }
    if (assoc.size() < 3) {
        throw InsufficientPoses("eval_ate: " + std::to_string(assoc.size()) +
                                " associated poses, need at least 3");
    }

    Eigen::Matrix3Xd src(3, assoc.size()), dst(3, assoc.size());
    for (size_t i = 0; i < assoc.size(); ++i) {
        src.col(i) = estimated.poses[assoc[i].first].second.translation;
        dst.col(i) = ground_truth.poses[assoc[i].second].second.translation;
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);

    AteResult result;
    result.associated = assoc.size();
    result.alignment.rotation = Quat(Mat3(t.block<3, 3>(0, 0))).normalized();
    result.alignment.translation = t.block<3, 1>(0, 3);

    double sum_sq = 0.0;
    for (size_t i = 0; i < assoc.size(); ++i) {
        const Vec3 aligned = result.alignment.apply(src.col(i));
        const double err_cm = (aligned - Vec3(dst.col(i))).norm() * 100.0;
        result.per_frame_cm.push_back(err_cm);
        sum_sq += err_cm * err_cm;
    }
    result.rmse_cm = std::sqrt(sum_sq / static_cast<double>(assoc.size()));
    return result;
}

double psnr(const ImageF& a, const ImageF& b) {
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double depth_l1_cm(const ImageF& rendered, const ImageF& target) {
    double total = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < rendered.data.size(); ++i) {
        if (rendered.data[i] > 0.f && target.data[i] > 0.f) {
            total += std::abs(static_cast<double>(rendered.data[i]) - target.data[i]);
            ++count;
        }
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count) * 100.0;
}

RenderMetrics eval_render(const std::vector<ImageF>& renders, const std::vector<ImageF>& targets,
                          const std::vector<ImageF>& rendered_depths,
                          const std::vector<ImageF>& target_depths) {
    RenderMetrics out;
    out.frames = renders.size();
    if (renders.empty()) return out;
    for (size_t i = 0; i < renders.size(); ++i) {
        out.psnr_db += psnr(renders[i], targets[i]);
        out.ssim += ssim_value(renders[i], targets[i]);
        if (i < rendered_depths.size() && i < target_depths.size()) {
            out.depth_l1_cm += depth_l1_cm(rendered_depths[i], target_depths[i]);
        }
    }
    out.psnr_db /= static_cast<double>(renders.size());
    out.ssim /= static_cast<double>(renders.size());
    out.depth_l1_cm /= static_cast<double>(renders.size());
    return out;
}

}  // namespace varsplat
