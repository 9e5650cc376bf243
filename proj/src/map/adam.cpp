#include "varsplat/map/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace varsplat {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr int kStride = 17;  // mean 3, rot 4, scale 3, opacity 1, color 3, variance 3

inline double adam_update(double grad, double& m, double& v, double bias1, double bias2,
                          double lr) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
    const double mh = m / bias1;
    const double vh = v / bias2;
    return -lr * mh / (std::sqrt(vh) + kEps);
}

}  // namespace

void SplatAdam::ensure(size_t n) {
    if (m_.size() < n * kStride) {
        m_.resize(n * kStride, 0.0);
        v_.resize(n * kStride, 0.0);
    }
}

void SplatAdam::step(std::vector<Splat>& splats, const GradientBundle& grads,
                     double scene_extent, bool freeze_variance) {
    ensure(splats.size());
    ++t_;
    const double bias1 = 1.0 - std::pow(kBeta1, t_);
    const double bias2 = 1.0 - std::pow(kBeta2, t_);
    const double lr_mean = rates_.mean * scene_extent;

    for (size_t i = 0; i < splats.size(); ++i) {
        Splat& s = splats[i];
        double* m = &m_[i * kStride];
        double* v = &v_[i * kStride];
        for (int k = 0; k < 3; ++k) {
            s.mean[k] += adam_update(grads.d_mean[i][k], m[k], v[k], bias1, bias2, lr_mean);
        }
        double q[4] = {s.rotation.w(), s.rotation.x(), s.rotation.y(), s.rotation.z()};
        for (int k = 0; k < 4; ++k) {
            q[k] += adam_update(grads.d_rotation[i][k], m[3 + k], v[3 + k], bias1, bias2,
                                rates_.rotation);
        }
        s.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
        for (int k = 0; k < 3; ++k) {
            s.log_scale[k] += adam_update(grads.d_log_scale[i][k], m[7 + k], v[7 + k], bias1,
                                          bias2, rates_.log_scale);
        }
        s.opacity_logit +=
            adam_update(grads.d_opacity_logit[i], m[10], v[10], bias1, bias2, rates_.opacity);
        for (int k = 0; k < 3; ++k) {
            s.color[k] += adam_update(grads.d_color[i][k], m[11 + k], v[11 + k], bias1, bias2,
                                      rates_.color);
        }
        if (!freeze_variance) {
            for (int k = 0; k < 3; ++k) {
                s.log_variance[k] += adam_update(grads.d_log_variance[i][k], m[14 + k], v[14 + k],
                                                 bias1, bias2, rates_.log_variance);
            }
        }

        if (!s.mean.allFinite() || !s.log_scale.allFinite() || !std::isfinite(s.opacity_logit) ||
            !s.color.allFinite() || !s.log_variance.allFinite() ||
            !std::isfinite(s.rotation.norm())) {
            throw std::runtime_error("optimizer produced a non-finite splat parameter");
        }
    }
}

Vec6 PoseAdam::step(const Vec6& grad) {
    ++t_;
    const double bias1 = 1.0 - std::pow(kBeta1, t_);
    const double bias2 = 1.0 - std::pow(kBeta2, t_);
    Vec6 delta;
    for (int k = 0; k < 6; ++k) {
        const double lr = k < 3 ? lr_rot_ : lr_trans_;
        delta[k] = adam_update(grad[k], m_[k], v_[k], bias1, bias2, lr);
    }
    return delta;
}

void PoseAdam::reset() {
    t_ = 0;
    m_.setZero();
    v_.setZero();
}

double ScalarAdam::step(double grad) {
    ++t_;
    const double bias1 = 1.0 - std::pow(kBeta1, t_);
    const double bias2 = 1.0 - std::pow(kBeta2, t_);
    return adam_update(grad, m_, v_, bias1, bias2, lr_);
}

}  // namespace varsplat
