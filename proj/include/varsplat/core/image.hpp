#pragma once

#include <cstddef>
#include <vector>

namespace varsplat {

// Dense row-major image, channel index fastest.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T(0))
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

    T& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    const T& at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

using ImageF = Image<float>;
using ImageD = Image<double>;
using ImageB = Image<unsigned char>;

}  // namespace varsplat
