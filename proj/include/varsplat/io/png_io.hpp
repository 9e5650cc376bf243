#pragma once

#include <string>

#include "varsplat/core/image.hpp"

namespace varsplat {

// 8-bit RGB, values clamped from [0,1]; no gamma applied.
void save_png_color(const std::string& path, const ImageF& image);
void save_png_color(const std::string& path, const ImageD& image);
ImageF load_png_color(const std::string& path);  // -> [0,1] H x W x 3

// 16-bit single-channel PNG scaled by `to_meters` (TUM depth uses 1/5000).
ImageF load_png_depth16(const std::string& path, double to_meters);

// Scalar image as a false-color PNG (normalized to its upper percentile).
void save_png_falsecolor(const std::string& path, const ImageD& scalar, double percentile = 99.0);

}  // namespace varsplat
