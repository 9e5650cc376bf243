#pragma once

#include <utility>
#include <vector>

#include "varsplat/core/image.hpp"
#include "varsplat/core/se3.hpp"

namespace varsplat {

inline constexpr double kVarianceFloor = 1e-6;  // epsilon_V inside the NLL
inline constexpr double kSsimC1 = 1e-4;         // (0.01)^2, dynamic range 1
inline constexpr double kSsimC2 = 9e-4;         // (0.03)^2

// Observation-precision deadband: residuals below the f32 resolution of the
// stored targets carry no signal, so they contribute zero loss and zero
// gradient. Keeps self-rendered targets an exact fixed point.
inline constexpr double kColorDeadband = 1e-7;
inline constexpr double kDepthDeadband = 1e-6;

// Weighted mean absolute color error: scale * sum_p w(p) sum_ch |pred-tgt| /
// (3 * norm). `weight` may be empty (all ones). Accumulates d/d_pred into
// d_acc when given.
double l1_color_term(const ImageD& pred, const ImageF& target, const ImageD& weight,
                     double norm, double scale, ImageD* d_acc);

// Same for single-channel depth; `weight` both selects and weights pixels.
double l1_depth_term(const ImageD& pred, const ImageF& target, const ImageD& weight,
                     double norm, double scale, ImageD* d_acc);

// scale * (1 - mean SSIM) with an 11x11 Gaussian window (sigma 1.5),
// zero-padded borders, averaged over pixels and channels.
double ssim_term(const ImageD& pred, const ImageF& target, double scale, ImageD* d_acc);

// Plain SSIM value between two images (no gradient), same kernel.
double ssim_value(const ImageF& a, const ImageF& b);

// Gaussian-NLL variance loss, summed over pixels where mask > 0:
//   R(p) / (2 V(p)) + log V(p),
// R = |dI|^2 (3 channels) + |dD|^2 (only where depth_weight > 0), V = channel
// mean of the variance image, floored at kVarianceFloor. Accumulates the
// exact adjoints of all three inputs when given. d_var_acc receives the
// per-channel adjoint (scalar adjoint / 3).
double variance_nll_term(const ImageD& pred_color, const ImageF& target_color,
                         const ImageD& pred_depth, const ImageF& target_depth,
                         const ImageD& variance, const ImageD& mask, const ImageD& depth_weight,
                         double scale, ImageD* d_color_acc, ImageD* d_depth_acc,
                         ImageD* d_var_acc);

// Value of the variance loss plus its derivative with respect to the scalar
// per-pixel variance, as an H x W image. Pixels outside the mask get zero.
std::pair<ImageD, double> grad_variance_loss(const ImageD& pred_color, const ImageF& target_color,
                                             const ImageD& pred_depth, const ImageF& target_depth,
                                             const ImageD& variance, const ImageD& mask,
                                             const ImageD& depth_weight);

// Scale regularizer: mean over splats and axes of |scale - target|, target
// isotropic per splat. Accumulates d/d_log_scale.
double scale_reg_term(const std::vector<Vec3>& scales, const std::vector<double>& targets,
                      double scale, std::vector<Vec3>* d_log_scale_acc);

}  // namespace varsplat
