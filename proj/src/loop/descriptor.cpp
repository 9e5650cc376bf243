#include "varsplat/loop/descriptor.hpp"

#include <algorithm>
#include <cmath>

namespace varsplat {

namespace {

template <typename T>
Eigen::VectorXd build_descriptor(const Image<T>& color) {
    const int w = color.width, h = color.height;
    std::vector<double> gray(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            gray[static_cast<size_t>(y) * w + x] =
                (color.at(x, y, 0) + color.at(x, y, 1) + color.at(x, y, 2)) / 3.0;
        }
    }

    // Average-pooled thumbnail.
    Eigen::VectorXd thumb = Eigen::VectorXd::Zero(kThumbSide * kThumbSide);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(kThumbSide * kThumbSide);
    for (int y = 0; y < h; ++y) {
        const int ty = std::min(kThumbSide - 1, y * kThumbSide / h);
        for (int x = 0; x < w; ++x) {
            const int tx = std::min(kThumbSide - 1, x * kThumbSide / w);
            thumb[ty * kThumbSide + tx] += gray[static_cast<size_t>(y) * w + x];
            counts[ty * kThumbSide + tx] += 1.0;
        }
    }
    for (int i = 0; i < thumb.size(); ++i) {
        if (counts[i] > 0.0) thumb[i] /= counts[i];
    }
    thumb.array() -= thumb.mean();
    const double tnorm = thumb.norm();
    if (tnorm > 1e-12) thumb /= tnorm;

    // Magnitude-weighted gradient orientation histogram.
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(kOrientationBins);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double gx = 0.5 * (gray[static_cast<size_t>(y) * w + x + 1] -
                                     gray[static_cast<size_t>(y) * w + x - 1]);
            const double gy = 0.5 * (gray[static_cast<size_t>(y + 1) * w + x] -
                                     gray[static_cast<size_t>(y - 1) * w + x]);
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag < 1e-12) continue;
            const double angle = std::atan2(gy, gx);  // [-pi, pi]
            int bin = static_cast<int>((angle + M_PI) / (2.0 * M_PI) * kOrientationBins);
            bin = std::clamp(bin, 0, kOrientationBins - 1);
            hist[bin] += mag;
        }
    }
    hist.array() -= hist.mean();
    const double hnorm = hist.norm();
    if (hnorm > 1e-12) hist /= hnorm;

    Eigen::VectorXd out(kDescriptorDim);
    out.head(kThumbSide * kThumbSide) = thumb;
    out.tail(kOrientationBins) = hist;
    const double norm = out.norm();
    if (norm > 1e-12) {
        out /= norm;
    } else {
        out.setZero();
        out[0] = 1.0;  // constant image fallback, still unit norm
    }
    return out;
}

}  // namespace

Eigen::VectorXd image_descriptor(const ImageF& color) { return build_descriptor(color); }
Eigen::VectorXd image_descriptor(const ImageD& color) { return build_descriptor(color); }

double descriptor_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(b);
}

double cross_similarity(const SubmapDescriptor& a, const SubmapDescriptor& b) {
    double best = -1.0;
    for (const auto& da : a.keyframe_descriptors) {
        for (const auto& db : b.keyframe_descriptors) {
            best = std::max(best, da.dot(db));
        }
    }
    return best;
}

double self_similarity(const SubmapDescriptor& desc, double percentile) {
    const size_t n = desc.keyframe_descriptors.size();
    if (n < 2) return 0.6;
    std::vector<double> sims;
    sims.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            sims.push_back(desc.keyframe_descriptors[i].dot(desc.keyframe_descriptors[j]));
        }
    }
    std::sort(sims.begin(), sims.end());
    const size_t k = std::min(
        sims.size() - 1,
        static_cast<size_t>(std::max(0.0, std::ceil(percentile / 100.0 * sims.size()) - 1.0)));
    return sims[k];
}

}  // namespace varsplat
