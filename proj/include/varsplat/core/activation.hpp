#pragma once

#include <algorithm>
#include <cmath>

namespace varsplat {

// Parameter activations. Opacity lives as a logit, scale and appearance
// variance as logs, so unconstrained gradient steps stay in-domain.

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) {
    return std::log(p / (1.0 - p));
}

// d sigmoid / d x at activated value y = sigmoid(x).
inline double sigmoid_grad_from_value(double y) {
    return y * (1.0 - y);
}

inline double activate_scale(double log_scale) { return std::exp(log_scale); }
inline double activate_variance(double log_var) { return std::exp(log_var); }

}  // namespace varsplat
