#pragma once

#include <vector>

#include "varsplat/map/mapper.hpp"

namespace varsplat {

struct RegistrationConfig {
    int iterations = 100;
    double lr_rot = 0.002;
    double lr_trans = 0.01;
    double lr_exposure = 0.01;
    double tau = 10.0;
    bool use_uncertainty = true;
};

struct RegistrationResult {
    // World-frame correction: a query keyframe at pose T is registered to
    // the db submap at corrected pose relative * T.
    SE3Pose relative;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> per_view_final;
    std::vector<std::pair<double, double>> exposure;  // (gain, bias) per view
    int iterations_run = 0;
};

// Localizes the query keyframes in the db submap by optimizing one relative
// pose plus per-view affine exposure; photometric loss weighted by the
// rendered uncertainty, depth unweighted; variance frozen. Throws
// RegistrationDiverged when the final loss exceeds the initial loss.
RegistrationResult register_submaps(const Submap& db, const std::vector<KeyframeView>& views,
                                    const SE3Pose& init_relative, const RegistrationConfig& cfg,
                                    const RenderOptions& opts = {});

}  // namespace varsplat
