#pragma once

#include <map>
#include <string>
#include <vector>

#include "varsplat/grad/backward.hpp"
#include "varsplat/grad/losses.hpp"
#include "varsplat/render/rasterizer.hpp"

namespace varsplat {

// Which loss to differentiate. Masks and uncertainty weights are frozen from
// the unperturbed render, matching their detached role during optimization.
struct LossSpec {
    bool photo_l2 = false;   // mean squared color error
    bool color = false;      // (1 - lambda_ssim) L1 + lambda_ssim (1 - SSIM)
    bool depth = false;      // masked depth L1
    bool reg = false;        // scale regularizer
    bool var = false;        // Gaussian-NLL variance loss
    bool track = false;      // lambda_c weighted color L1 + (1 - lambda_c) depth L1
    double lambda_ssim = 0.2;
    double lambda_c = 0.9;
    double tau = 10.0;
    bool freeze_variance = false;  // supply zero dL/dV to the backward pass
    // Wide support so the footprint cutoff's value step is far below
    // finite-difference resolution.
    double footprint_sigma = 6.5;
};

struct FdTargets {
    ImageF color;  // H x W x 3
    ImageF depth;  // H x W (0 = invalid)
};

struct FdClassReport {
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    size_t entries = 0;
};

struct FdReport {
    std::map<std::string, FdClassReport> classes;
    double loss_value = 0.0;

    double max_rel_err() const {
        double m = 0.0;
        for (const auto& [_, c] : classes) m = std::max(m, c.max_rel_err);
        return m;
    }
    bool pass(double threshold) const { return max_rel_err() <= threshold; }
    std::string to_json() const;
};

// Frozen per-pixel context shared by the analytic and FD value paths.
struct FrozenMasks {
    ImageD color_weight;   // track: w_p * alpha^3 * inlier; empty otherwise
    ImageD depth_weight;   // depth validity (and soft alpha for track)
    ImageD var_mask;       // alpha > 0.5
    double color_norm = 1.0;
    double depth_norm = 1.0;
};

FrozenMasks freeze_masks(const RenderOutput& base, const FdTargets& targets, const LossSpec& spec);

// Loss value for a render under frozen masks.
double loss_value(const RenderOutput& render, const std::vector<Splat>& splats,
                  const std::vector<double>& reg_targets, const FdTargets& targets,
                  const LossSpec& spec, const FrozenMasks& frozen);

// Analytic gradient of the same loss (adjoint images -> backward_rasterize,
// plus the direct scale-regularizer path).
GradientBundle loss_gradient(const RenderOutput& render, const std::vector<Splat>& splats,
                             const std::vector<double>& reg_targets, const FdTargets& targets,
                             const LossSpec& spec, const FrozenMasks& frozen,
                             double* value_out = nullptr, int threads = 1);

// Central finite differences over every parameter class. Relative error per
// entry uses max(|analytic|, |fd|) as denominator; entries below 1e-6 of the
// class magnitude count as exact.
FdReport finite_difference_check(const std::vector<Splat>& splats, const SE3Pose& view,
                                 const CameraIntrinsics& intr,
                                 const std::vector<double>& reg_targets, const FdTargets& targets,
                                 const LossSpec& spec, double step, int threads = 1);

}  // namespace varsplat
