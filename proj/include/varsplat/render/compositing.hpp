#pragma once

#include <vector>

#include "varsplat/core/se3.hpp"

namespace varsplat {

inline constexpr double kTransmittanceStop = 1e-4;

// One front-to-back contribution at a pixel.
struct Contribution {
    double alpha = 0.0;       // effective opacity, in [0, 0.999]
    Vec3 color = Vec3::Zero();
    Vec3 variance = Vec3::Zero();
    double z = 0.0;
};

struct PixelComposite {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;       // unnormalized sum of w_i * z_i
    double alpha = 0.0;       // sum of w_i
    Vec3 variance = Vec3::Zero();
};

// Front-to-back alpha compositing of color, depth, and total-variance
// uncertainty: w_i = T_i a_i, C = sum w_i c_i, D = sum w_i z_i,
// V = sum w_i (s_i^2 + c_i^2) - C^2, stopping once transmittance falls
// below kTransmittanceStop. Input must be sorted front-to-back.
PixelComposite composite_pixel(const std::vector<Contribution>& ordered);

}  // namespace varsplat
