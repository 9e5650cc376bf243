#pragma once

#include <string>

#include "varsplat/core/image.hpp"

namespace varsplat {

// Portable FloatMap, little-endian, bottom-up rows. 1 or 3 channels.
void write_pfm(const std::string& path, const ImageF& image);
void write_pfm(const std::string& path, const ImageD& image);  // converted to f32
ImageF read_pfm(const std::string& path);

}  // namespace varsplat
