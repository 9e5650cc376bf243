#pragma once

#include <vector>

#include "varsplat/core/image.hpp"
#include "varsplat/io/trajectory.hpp"

namespace varsplat {

struct AteResult {
    double rmse_cm = 0.0;
    std::vector<double> per_frame_cm;
    size_t associated = 0;
    SE3Pose alignment;  // applied to the estimate
};

// Associates by nearest timestamp (within max_dt), rigidly aligns with
// Umeyama (scale fixed at 1), reports the RMSE of translational residuals.
// Throws InsufficientPoses with fewer than 3 associations.
AteResult eval_ate(const Trajectory& estimated, const Trajectory& ground_truth,
                   double max_dt = 0.02);

struct RenderMetrics {
    double psnr_db = 0.0;    // capped at 100 for identical images
    double ssim = 0.0;
    double depth_l1_cm = 0.0;
    size_t frames = 0;
};

double psnr(const ImageF& a, const ImageF& b);

// Depth L1 in cm over pixels where both depths are positive.
double depth_l1_cm(const ImageF& rendered, const ImageF& target);

// Averages PSNR / SSIM / depth L1 over corresponding frames.
RenderMetrics eval_render(const std::vector<ImageF>& renders, const std::vector<ImageF>& targets,
                          const std::vector<ImageF>& rendered_depths,
                          const std::vector<ImageF>& target_depths);

}  // namespace varsplat
