#pragma once

#include <vector>

#include "varsplat/core/image.hpp"
#include "varsplat/core/types.hpp"

namespace varsplat {

// Per-pixel confidence weights from a rendered variance image:
//   w_p = exp(-(log V - median_Omega(log V)) / tau).
struct WeightMap {
    ImageD values;       // H x W, zero outside the mask
    double tau = 0.0;
    double median_log = 0.0;
};

struct SplatWeights {
    std::vector<double> values;
    double tau = 0.0;
    double median_log = 0.0;
};

// `variance` is H x W x 3; the scalar variance is the channel mean, floored.
// `mask` is H x W (nonzero = valid); empty means all pixels valid.
// Throws EmptyMask when no pixel is valid.
WeightMap pixel_weights(const ImageD& variance, const ImageD& mask, double tau);

// Per-splat weights over channel-mean appearance variance. Throws EmptySubmap.
SplatWeights splat_weights(const Submap& submap, double tau);

// Opacity-weighted reliable fraction, weights clamped at 1:
//   r = sum_j min(w_j, 1) alpha_j / sum_j alpha_j, in (0, 1].
double reliability_ratio(const Submap& submap, double tau);

// Gaussian-NLL loss value over the mask (sum of per-pixel terms); matches
// grad_variance_loss's value path bit-exactly.
double variance_nll_loss(const ImageD& pred_color, const ImageF& target_color,
                         const ImageD& pred_depth, const ImageF& target_depth,
                         const ImageD& variance, const ImageD& mask, const ImageD& depth_weight);

// Lower median of a copy of `values` (deterministic for even counts).
double lower_median(std::vector<double> values);

}  // namespace varsplat
