#include "varsplat/io/tum.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "varsplat/core/errors.hpp"
#include "varsplat/io/png_io.hpp"

namespace varsplat {

namespace {

struct IndexEntry {
    double timestamp;
    std::string file;
};

std::vector<IndexEntry> read_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingIndexFile("missing index file: " + path);
    std::vector<IndexEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        IndexEntry e;
        if (ss >> e.timestamp >> e.file) entries.push_back(e);
    }
    std::sort(entries.begin(), entries.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.timestamp < b.timestamp; });
    return entries;
}

ImageF downscale_color(const ImageF& src, int factor) {
    if (factor <= 1) return src;
    ImageF dst(src.width / factor, src.height / factor, 3);
    for (int y = 0; y < dst.height; ++y) {
        for (int x = 0; x < dst.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        acc += src.at(x * factor + dx, y * factor + dy, c);
                    }
                }
                dst.at(x, y, c) = static_cast<float>(acc / (factor * factor));
            }
        }
    }
    return dst;
}

// Center sample keeps the 0-means-invalid convention intact.
ImageF downscale_depth(const ImageF& src, int factor) {
    if (factor <= 1) return src;
    ImageF dst(src.width / factor, src.height / factor, 1);
    for (int y = 0; y < dst.height; ++y) {
        for (int x = 0; x < dst.width; ++x) {
            dst.at(x, y) = src.at(x * factor + factor / 2, y * factor + factor / 2);
        }
    }
    return dst;
}

}  // namespace

TumDataset load_tum_dataset(const std::string& dir, const CameraIntrinsics& intrinsics,
                            int max_frames, int downscale) {
    const auto rgb = read_index(dir + "/rgb.txt");
    const auto depth = read_index(dir + "/depth.txt");

    TumDataset out;
    {
        std::ifstream gt_file(dir + "/groundtruth.txt");
        if (gt_file) out.ground_truth = load_trajectory_tum(dir + "/groundtruth.txt");
    }

    // Nearest-timestamp association over sorted indices, each depth used once.
    std::vector<std::pair<size_t, size_t>> assoc;
    size_t d = 0;
    for (size_t r = 0; r < rgb.size(); ++r) {
        while (d + 1 < depth.size() && std::abs(depth[d + 1].timestamp - rgb[r].timestamp) <=
                                           std::abs(depth[d].timestamp - rgb[r].timestamp)) {
            ++d;
        }
        if (d < depth.size() &&
            std::abs(depth[d].timestamp - rgb[r].timestamp) <= kTumMaxAssocDt) {
            assoc.emplace_back(r, d);
            ++d;
            if (d >= depth.size()) {
                out.dropped_frames += rgb.size() - 1 - r;
                break;
            }
        } else {
            ++out.dropped_frames;
        }
    }
    if (assoc.empty()) throw EmptyAssociation("no rgb/depth pairs within tolerance in " + dir);

    const CameraIntrinsics scaled =
        downscale > 1 ? intrinsics.scaled(1.0 / downscale) : intrinsics;

    const size_t count =
        max_frames > 0 ? std::min<size_t>(assoc.size(), max_frames) : assoc.size();
    out.frames.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const auto& [r, dd] = assoc[i];
        Frame frame;
        frame.index = static_cast<int>(i);
        frame.timestamp = rgb[r].timestamp;
        frame.color = downscale_color(load_png_color(dir + "/" + rgb[r].file), downscale);
        frame.depth = downscale_depth(
            load_png_depth16(dir + "/" + depth[dd].file, kTumDepthScale), downscale);
        frame.intrinsics = scaled;
        out.frames.push_back(std::move(frame));
    }
    return out;
}

}  // namespace varsplat
