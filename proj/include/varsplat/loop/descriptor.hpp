#pragma once

#include <vector>

#include "varsplat/core/image.hpp"
#include "varsplat/core/se3.hpp"

namespace varsplat {

inline constexpr int kThumbSide = 8;
inline constexpr int kOrientationBins = 128;
inline constexpr int kDescriptorDim = kThumbSide * kThumbSide + kOrientationBins;  // 192

// Training-free global image descriptor: mean-removed 8x8 grayscale
// thumbnail concatenated with a mean-removed 128-bin gradient-orientation
// histogram, each half L2-normalized, whole vector unit norm. Invariant to a
// global brightness offset.
Eigen::VectorXd image_descriptor(const ImageF& color);
Eigen::VectorXd image_descriptor(const ImageD& color);

struct SubmapDescriptor {
    std::vector<Eigen::VectorXd> keyframe_descriptors;
    std::vector<int> keyframe_ids;
};

// Cosine similarity (descriptors are unit norm).
double descriptor_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Max pairwise keyframe similarity between two submaps.
double cross_similarity(const SubmapDescriptor& a, const SubmapDescriptor& b);

// p-th percentile (nearest rank, lower) of the pairwise similarities among a
// submap's own keyframes; 0.6 when fewer than two keyframes exist.
double self_similarity(const SubmapDescriptor& desc, double percentile);

}  // namespace varsplat
