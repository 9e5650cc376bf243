#include "varsplat/uncertainty/weights.hpp"

#include <algorithm>
#include <cmath>

#include "varsplat/core/errors.hpp"
#include "varsplat/grad/losses.hpp"

namespace varsplat {

double lower_median(std::vector<double> values) {
    const size_t n = values.size();
    const size_t k = (n - 1) / 2;
    std::nth_element(values.begin(), values.begin() + k, values.end());
    return values[k];
}

WeightMap pixel_weights(const ImageD& variance, const ImageD& mask, double tau) {
    const int w = variance.width, h = variance.height;
    std::vector<double> logs;
    logs.reserve(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.empty() && mask.at(x, y) == 0.0) continue;
            const double v = std::max(
                kVarianceFloor,
                (variance.at(x, y, 0) + variance.at(x, y, 1) + variance.at(x, y, 2)) / 3.0);
            logs.push_back(std::log(v));
        }
    }
    if (logs.empty()) throw EmptyMask("pixel_weights: no valid pixels");

    WeightMap out;
    out.tau = tau;
    out.median_log = lower_median(std::move(logs));
    out.values = ImageD(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.empty() && mask.at(x, y) == 0.0) continue;
            const double v = std::max(
                kVarianceFloor,
                (variance.at(x, y, 0) + variance.at(x, y, 1) + variance.at(x, y, 2)) / 3.0);
            out.values.at(x, y) = std::exp(-(std::log(v) - out.median_log) / tau);
        }
    }
    return out;
}

SplatWeights splat_weights(const Submap& submap, double tau) {
    if (submap.empty()) throw EmptySubmap("splat_weights: submap has no splats");
    std::vector<double> logs;
    logs.reserve(submap.size());
    for (const Splat& s : submap.splats) {
        const Vec3 v = s.app_variance();
        logs.push_back(std::log(std::max(kVarianceFloor, (v[0] + v[1] + v[2]) / 3.0)));
    }
    SplatWeights out;
    out.tau = tau;
    out.median_log = lower_median(logs);
    out.values.resize(logs.size());
    for (size_t i = 0; i < logs.size(); ++i) {
        out.values[i] = std::exp(-(logs[i] - out.median_log) / tau);
    }
    return out;
}

double reliability_ratio(const Submap& submap, double tau) {
    const SplatWeights weights = splat_weights(submap, tau);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < submap.size(); ++i) {
        const double alpha = submap.splats[i].opacity();
        num += std::min(1.0, weights.values[i]) * alpha;
        den += alpha;
    }
    return num / den;
}

double variance_nll_loss(const ImageD& pred_color, const ImageF& target_color,
                         const ImageD& pred_depth, const ImageF& target_depth,
                         const ImageD& variance, const ImageD& mask, const ImageD& depth_weight) {
    return variance_nll_term(pred_color, target_color, pred_depth, target_depth, variance, mask,
                             depth_weight, 1.0, nullptr, nullptr, nullptr);
}

}  // namespace varsplat
