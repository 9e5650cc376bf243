#include "varsplat/io/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <vector>

#include "varsplat/core/errors.hpp"

namespace varsplat {

namespace {

template <typename T>
cv::Mat to_bgr8(const Image<T>& image) {
    cv::Mat mat(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            auto& px = mat.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(image.at(x, y, c)), 0.0, 1.0);
                px[2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    return mat;
}

// Piecewise-linear jet map over [0,1].
void jet(double t, unsigned char rgb[3]) {
    t = std::clamp(t, 0.0, 1.0);
    const double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
    const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
    const double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
    rgb[0] = static_cast<unsigned char>(std::lround(r * 255.0));
    rgb[1] = static_cast<unsigned char>(std::lround(g * 255.0));
    rgb[2] = static_cast<unsigned char>(std::lround(b * 255.0));
}

}  // namespace

void save_png_color(const std::string& path, const ImageF& image) {
    if (!cv::imwrite(path, to_bgr8(image))) throw IoError("png write failed: " + path);
}

void save_png_color(const std::string& path, const ImageD& image) {
    if (!cv::imwrite(path, to_bgr8(image))) throw IoError("png write failed: " + path);
}

ImageF load_png_color(const std::string& path) {
    const cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
    if (mat.empty()) throw IoError("png read failed: " + path);
    ImageF image(mat.cols, mat.rows, 3);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            const auto& px = mat.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) image.at(x, y, c) = px[2 - c] / 255.f;
        }
    }
    return image;
}

ImageF load_png_depth16(const std::string& path, double to_meters) {
    const cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw IoError("depth png read failed: " + path);
    if (mat.type() != CV_16UC1) throw IoError("expected 16-bit single-channel depth: " + path);
    ImageF image(mat.cols, mat.rows, 1);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            image.at(x, y) = static_cast<float>(mat.at<uint16_t>(y, x) * to_meters);
        }
    }
    return image;
}

void save_png_falsecolor(const std::string& path, const ImageD& scalar, double percentile) {
    std::vector<double> values;
    values.reserve(scalar.data.size());
    for (double v : scalar.data) {
        if (std::isfinite(v)) values.push_back(v);
    }
    double hi = 1.0;
    if (!values.empty()) {
        const size_t k = std::min(values.size() - 1,
                                  static_cast<size_t>(percentile / 100.0 * values.size()));
        std::nth_element(values.begin(), values.begin() + k, values.end());
        hi = std::max(values[k], 1e-12);
    }
    cv::Mat mat(scalar.height, scalar.width, CV_8UC3);
    for (int y = 0; y < scalar.height; ++y) {
        for (int x = 0; x < scalar.width; ++x) {
            unsigned char rgb[3];
            jet(scalar.at(x, y) / hi, rgb);
            mat.at<cv::Vec3b>(y, x) = cv::Vec3b(rgb[2], rgb[1], rgb[0]);
        }
    }
    if (!cv::imwrite(path, mat)) throw IoError("png write failed: " + path);
}

}  // namespace varsplat
