#include "varsplat/io/pfm.hpp"

#include <cstdio>
#include <fstream>

#include "varsplat/core/errors.hpp"

namespace varsplat {

void write_pfm(const std::string& path, const ImageF& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw IoError("pfm supports 1 or 3 channels: " + path);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out << (image.channels == 3 ? "PF" : "Pf") << "\n"
        << image.width << " " << image.height << "\n"
        << "-1.0\n";
    // Bottom-up row order.
    for (int y = image.height - 1; y >= 0; --y) {
        const float* row = &image.data[static_cast<size_t>(y) * image.width * image.channels];
        out.write(reinterpret_cast<const char*>(row),
                  static_cast<std::streamsize>(sizeof(float) * image.width * image.channels));
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_pfm(const std::string& path, const ImageD& image) {
    ImageF f(image.width, image.height, image.channels);
    for (size_t i = 0; i < image.data.size(); ++i) f.data[i] = static_cast<float>(image.data[i]);
    write_pfm(path, f);
}

ImageF read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0) {
        throw IoError("bad pfm header: " + path);
    }
    if (scale >= 0.0) throw IoError("big-endian pfm not supported: " + path);
    in.get();  // single whitespace after the scale

    ImageF image(w, h, magic == "PF" ? 3 : 1);
    for (int y = h - 1; y >= 0; --y) {
        float* row = &image.data[static_cast<size_t>(y) * w * image.channels];
        in.read(reinterpret_cast<char*>(row),
                static_cast<std::streamsize>(sizeof(float) * w * image.channels));
    }
    if (!in) throw IoError("truncated pfm: " + path);
    return image;
}

}  // namespace varsplat
