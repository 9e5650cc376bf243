#include "varsplat/render/compositing.hpp"

#include <algorithm>

namespace varsplat {

PixelComposite composite_pixel(const std::vector<Contribution>& ordered) {
    PixelComposite out;
    Vec3 second_moment = Vec3::Zero();  // sum of w_i * (sigma_i^2 + c_i^2)
    double transmittance = 1.0;

    for (const Contribution& c : ordered) {
        if (transmittance < kTransmittanceStop) break;
        const double w = transmittance * c.alpha;
        out.color += w * c.color;
        out.depth += w * c.z;
        out.alpha += w;
        second_moment += w * (c.variance + c.color.cwiseProduct(c.color));
        transmittance *= (1.0 - c.alpha);
    }

    out.variance = second_moment - out.color.cwiseProduct(out.color);
    // Exact arithmetic gives V >= 0 (Cauchy-Schwarz with sum w <= 1); clip
    // the float dust.
    out.variance = out.variance.cwiseMax(0.0);
    return out;
}

}  // namespace varsplat
