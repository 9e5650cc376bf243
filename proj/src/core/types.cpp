#include "varsplat/core/types.hpp"

namespace varsplat {

Mat3 covariance_from_scale_rotation(const Vec3& scale, const Quat& rotation) {
    const Mat3 r = rotation.normalized().toRotationMatrix();
    const Vec3 s2 = scale.array().square();
    return r * s2.asDiagonal() * r.transpose();
}

}  // namespace varsplat
