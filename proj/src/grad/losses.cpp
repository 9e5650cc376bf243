#include "varsplat/grad/losses.hpp"

#include <array>
#include <cmath>

namespace varsplat {

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::array<double, 11> ssim_kernel() {
    std::array<double, 11> k{};
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable 11-tap Gaussian, zero padding. src and dst are W*H planes.
void blur_plane(const std::vector<double>& src, std::vector<double>& tmp,
                std::vector<double>& dst, int w, int h) {
    static const std::array<double, 11> kernel = ssim_kernel();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -5; k <= 5; ++k) {
                const int xx = x + k;
                if (xx < 0 || xx >= w) continue;
                acc += kernel[k + 5] * src[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -5; k <= 5; ++k) {
                const int yy = y + k;
                if (yy < 0 || yy >= h) continue;
                acc += kernel[k + 5] * tmp[static_cast<size_t>(yy) * w + x];
            }
            dst[static_cast<size_t>(y) * w + x] = acc;
        }
    }
}

struct SsimPlanes {
    std::vector<double> x, y, mu_x, mu_y, xx, yy, xy, tmp, a, b, c;
    explicit SsimPlanes(size_t n)
        : x(n), y(n), mu_x(n), mu_y(n), xx(n), yy(n), xy(n), tmp(n), a(n), b(n), c(n) {}
};

// Core SSIM with optional gradient into d_acc (channel ch of an HxWx3 image).
// planes.x and planes.y hold the two input planes on entry.
double ssim_channel(int w, int h, double d_scale, ImageD* d_acc, int ch, SsimPlanes& planes) {
    const size_t n = static_cast<size_t>(w) * h;
    std::vector<double> prod(n);

    blur_plane(planes.x, planes.tmp, planes.mu_x, w, h);
    blur_plane(planes.y, planes.tmp, planes.mu_y, w, h);
    for (size_t i = 0; i < n; ++i) prod[i] = planes.x[i] * planes.x[i];
    blur_plane(prod, planes.tmp, planes.xx, w, h);
    for (size_t i = 0; i < n; ++i) prod[i] = planes.y[i] * planes.y[i];
    blur_plane(prod, planes.tmp, planes.yy, w, h);
    for (size_t i = 0; i < n; ++i) prod[i] = planes.x[i] * planes.y[i];
    blur_plane(prod, planes.tmp, planes.xy, w, h);

    double ssim_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double mx = planes.mu_x[i], my = planes.mu_y[i];
        const double sx = planes.xx[i] - mx * mx;
        const double sy = planes.yy[i] - my * my;
        const double sxy = planes.xy[i] - mx * my;
        const double a1 = 2.0 * mx * my + kSsimC1;
        const double a2 = 2.0 * sxy + kSsimC2;
        const double b1 = mx * mx + my * my + kSsimC1;
        const double b2 = sx + sy + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        ssim_sum += s;

        if (d_acc) {
            const double inv_bb = 1.0 / (b1 * b2);
            const double s_a1 = a2 * inv_bb;
            const double s_a2 = a1 * inv_bb;
            const double s_b1 = -s / b1;
            const double s_b2 = -s / b2;
            // Partials w.r.t. the five blurred statistics.
            planes.a[i] = d_scale * (s_a1 * 2.0 * my - s_a2 * 2.0 * my + s_b1 * 2.0 * mx -
                                     s_b2 * 2.0 * mx);        // d/d mu_x
            planes.b[i] = d_scale * s_b2;                      // d/d (G*x^2)
            planes.c[i] = d_scale * (s_a2 * 2.0);              // d/d (G*xy)
        }
    }

    if (d_acc) {
        blur_plane(planes.a, planes.tmp, planes.mu_x, w, h);   // reuse mu_x as scratch
        blur_plane(planes.b, planes.tmp, planes.mu_y, w, h);
        blur_plane(planes.c, planes.tmp, planes.xx, w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                d_acc->at(x, y, ch) += planes.mu_x[i] + 2.0 * planes.x[i] * planes.mu_y[i] +
                                       planes.y[i] * planes.xx[i];
            }
        }
    }
    return ssim_sum;
}

}  // namespace

double l1_color_term(const ImageD& pred, const ImageF& target, const ImageD& weight,
                     double norm, double scale, ImageD* d_acc) {
    const int w = pred.width, h = pred.height;
    const double inv = scale / (3.0 * norm);
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double wp = weight.empty() ? 1.0 : weight.at(x, y);
            if (wp == 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                const double diff = pred.at(x, y, c) - target.at(x, y, c);
                if (std::abs(diff) <= kColorDeadband) continue;
                total += wp * std::abs(diff);
                if (d_acc) d_acc->at(x, y, c) += inv * wp * sgn(diff);
            }
        }
    }
    return scale * total / (3.0 * norm);
}

double l1_depth_term(const ImageD& pred, const ImageF& target, const ImageD& weight,
                     double norm, double scale, ImageD* d_acc) {
    const int w = pred.width, h = pred.height;
    const double inv = scale / norm;
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double wp = weight.empty() ? 1.0 : weight.at(x, y);
            if (wp == 0.0) continue;
            const double diff = pred.at(x, y) - target.at(x, y);
            if (std::abs(diff) <= kDepthDeadband) continue;
            total += wp * std::abs(diff);
            if (d_acc) d_acc->at(x, y) += inv * wp * sgn(diff);
        }
    }
    return scale * total / norm;
}

double ssim_term(const ImageD& pred, const ImageF& target, double scale, ImageD* d_acc) {
    const int w = pred.width, h = pred.height;
    const size_t n = static_cast<size_t>(w) * h;
    SsimPlanes planes(n);
    const double count = 3.0 * static_cast<double>(n);
    // loss = scale * (1 - mean S)  =>  dL/dS(p) = -scale / count.
    const double d_scale = -scale / count;

    double ssim_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                const double p = pred.at(x, y, c);
                const double t = target.at(x, y, c);
                planes.x[i] = std::abs(p - t) <= kColorDeadband ? t : p;
                planes.y[i] = t;
            }
        }
        ssim_sum += ssim_channel(w, h, d_scale, d_acc, c, planes);
    }
    return scale * (1.0 - ssim_sum / count);
}

double ssim_value(const ImageF& a, const ImageF& b) {
    const int w = a.width, h = a.height;
    const size_t n = static_cast<size_t>(w) * h;
    SsimPlanes planes(n);
    double ssim_sum = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                planes.x[i] = a.at(x, y, c);
                planes.y[i] = b.at(x, y, c);
            }
        }
        ssim_sum += ssim_channel(w, h, 0.0, nullptr, c, planes);
    }
    return ssim_sum / (static_cast<double>(n) * a.channels);
}

double variance_nll_term(const ImageD& pred_color, const ImageF& target_color,
                         const ImageD& pred_depth, const ImageF& target_depth,
                         const ImageD& variance, const ImageD& mask, const ImageD& depth_weight,
                         double scale, ImageD* d_color_acc, ImageD* d_depth_acc,
                         ImageD* d_var_acc) {
    const int w = pred_color.width, h = pred_color.height;
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.empty() && mask.at(x, y) == 0.0) continue;

            double v_raw = (variance.at(x, y, 0) + variance.at(x, y, 1) + variance.at(x, y, 2)) / 3.0;
            const bool floored = v_raw < kVarianceFloor;
            const double v = floored ? kVarianceFloor : v_raw;

            double residual = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = pred_color.at(x, y, c) - target_color.at(x, y, c);
                residual += d * d;
            }
            const bool use_depth = !depth_weight.empty() && depth_weight.at(x, y) > 0.0;
            double dd = 0.0;
            if (use_depth) {
                dd = pred_depth.at(x, y) - target_depth.at(x, y);
                residual += dd * dd;
            }

            total += residual / (2.0 * v) + std::log(v);

            if (d_color_acc) {
                for (int c = 0; c < 3; ++c) {
                    const double d = pred_color.at(x, y, c) - target_color.at(x, y, c);
                    d_color_acc->at(x, y, c) += scale * d / v;
                }
            }
            if (d_depth_acc && use_depth) d_depth_acc->at(x, y) += scale * dd / v;
            if (d_var_acc && !floored) {
                const double dv = scale * (-residual / (2.0 * v * v) + 1.0 / v) / 3.0;
                for (int c = 0; c < 3; ++c) d_var_acc->at(x, y, c) += dv;
            }
        }
    }
    return scale * total;
}

std::pair<ImageD, double> grad_variance_loss(const ImageD& pred_color, const ImageF& target_color,
                                             const ImageD& pred_depth, const ImageF& target_depth,
                                             const ImageD& variance, const ImageD& mask,
                                             const ImageD& depth_weight) {
    const int w = pred_color.width, h = pred_color.height;
    ImageD d_var(w, h, 3);
    const double value = variance_nll_term(pred_color, target_color, pred_depth, target_depth,
                                           variance, mask, depth_weight, 1.0, nullptr, nullptr,
                                           &d_var);
    ImageD d_scalar(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            d_scalar.at(x, y) = 3.0 * d_var.at(x, y, 0);  // undo the per-channel split
        }
    }
    return {std::move(d_scalar), value};
}

double scale_reg_term(const std::vector<Vec3>& scales, const std::vector<double>& targets,
                      double scale, std::vector<Vec3>* d_log_scale_acc) {
    if (scales.empty()) return 0.0;
    const double inv = 1.0 / (3.0 * static_cast<double>(scales.size()));
    double total = 0.0;
    for (size_t i = 0; i < scales.size(); ++i) {
        const double target = targets[i];
        for (int k = 0; k < 3; ++k) {
            const double diff = scales[i][k] - target;
            total += std::abs(diff);
            if (d_log_scale_acc) {
                // d|s - t|/d log s = sign(s - t) * s.
                (*d_log_scale_acc)[i][k] += scale * inv * sgn(diff) * scales[i][k];
            }
        }
    }
    return scale * total * inv;
}

}  // namespace varsplat
