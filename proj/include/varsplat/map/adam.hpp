#pragma once

#include <vector>

#include "varsplat/grad/backward.hpp"
#include "varsplat/core/types.hpp"

namespace varsplat {

// Per-class learning rates for splat parameters. Mean rate is multiplied by
// the scene extent at step time.
struct SplatLearningRates {
    double mean = 1.6e-4;
    double rotation = 1e-3;
    double log_scale = 1e-3;
    double opacity = 5e-2;
    double color = 2.5e-3;
    double log_variance = 1e-2;
};

// Adam over all splat parameters, structure-of-arrays state. Splats may be
// appended between steps; state grows with zeros.
class SplatAdam {
public:
    explicit SplatAdam(const SplatLearningRates& rates = {}) : rates_(rates) {}

    // One step; quaternions are renormalized afterwards. Throws
    // std::runtime_error if any parameter becomes non-finite.
    void step(std::vector<Splat>& splats, const GradientBundle& grads, double scene_extent,
              bool freeze_variance);

    void reset() { *this = SplatAdam(rates_); }
    const SplatLearningRates& rates() const { return rates_; }

private:
    SplatLearningRates rates_;
    int t_ = 0;
    std::vector<double> m_, v_;  // 17 doubles per splat

    void ensure(size_t n);
};

// Adam on a 6-vector twist, split rates for the rotational and translational
// blocks.
class PoseAdam {
public:
    PoseAdam(double lr_rot, double lr_trans) : lr_rot_(lr_rot), lr_trans_(lr_trans) {}

    // Returns the increment to apply as pose <- exp(delta) * pose.
    Vec6 step(const Vec6& grad);

    void reset();

private:
    double lr_rot_, lr_trans_;
    int t_ = 0;
    Vec6 m_ = Vec6::Zero(), v_ = Vec6::Zero();
};

// Scalar Adam for exposure coefficients and similar knobs.
class ScalarAdam {
public:
    explicit ScalarAdam(double lr) : lr_(lr) {}
    double step(double grad);

private:
    double lr_;
    int t_ = 0;
    double m_ = 0.0, v_ = 0.0;
};

}  // namespace varsplat
