#include "varsplat/io/submap_io.hpp"

#include <fstream>
#include <json.hpp>

#include "varsplat/core/errors.hpp"

namespace varsplat {

namespace {

using nlohmann::json;

json pose_to_json(const SE3Pose& p) {
    return json{{"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}},
                {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

SE3Pose pose_from_json(const json& j) {
    SE3Pose p;
    const auto& q = j.at("q");
    const auto& t = j.at("t");
    p.rotation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                      q[3].get<double>());
    p.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    return p;
}

void put_f32(std::vector<float>& buf, double v) { buf.push_back(static_cast<float>(v)); }

}  // namespace

void save_submap(const std::string& base_path, const Submap& submap,
                 const SubmapSidecar& sidecar) {
    std::ofstream out(base_path + ".vspl", std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + base_path + ".vspl");

    out.write("VSPL", 4);
    const uint32_t version = kSubmapFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t count = submap.splats.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));

    std::vector<float> buf;
    buf.reserve(submap.splats.size() * 17);
    for (const Splat& s : submap.splats) {
        for (int k = 0; k < 3; ++k) put_f32(buf, s.mean[k]);
        put_f32(buf, s.rotation.w());
        put_f32(buf, s.rotation.x());
        put_f32(buf, s.rotation.y());
        put_f32(buf, s.rotation.z());
        for (int k = 0; k < 3; ++k) put_f32(buf, s.log_scale[k]);
        put_f32(buf, s.opacity_logit);
        for (int k = 0; k < 3; ++k) put_f32(buf, s.color[k]);
        for (int k = 0; k < 3; ++k) put_f32(buf, s.log_variance[k]);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + base_path + ".vspl");

    json side{{"id", submap.id},
              {"anchor_pose", pose_to_json(submap.anchor_pose)},
              {"keyframe_ids", submap.keyframe_ids},
              {"creation_frame", submap.creation_frame}};
    if (!sidecar.keyframe_poses.empty()) {
        json poses = json::array();
        for (const SE3Pose& p : sidecar.keyframe_poses) poses.push_back(pose_to_json(p));
        side["keyframe_poses"] = poses;
    }
    std::ofstream js(base_path + ".json");
    if (!js) throw IoError("cannot open for write: " + base_path + ".json");
    js << side.dump(2) << "\n";
}

Submap load_submap(const std::string& base_path, SubmapSidecar* sidecar) {
    std::ifstream in(base_path + ".vspl", std::ios::binary);
    if (!in) throw IoError("cannot open: " + base_path + ".vspl");

    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "VSPL") throw IoError("bad magic: " + base_path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kSubmapFormatVersion) {
        throw IoError("unsupported submap version " + std::to_string(version));
    }
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));

    std::vector<float> buf(count * 17);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw IoError("truncated submap: " + base_path);

    Submap submap;
    submap.splats.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        const float* f = &buf[i * 17];
        Splat& s = submap.splats[i];
        s.mean = Vec3(f[0], f[1], f[2]);
        s.rotation = Quat(f[3], f[4], f[5], f[6]);
        s.log_scale = Vec3(f[7], f[8], f[9]);
        s.opacity_logit = f[10];
        s.color = Vec3(f[11], f[12], f[13]);
        s.log_variance = Vec3(f[14], f[15], f[16]);
    }
    submap.reg_scale_targets.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        submap.reg_scale_targets[i] = submap.splats[i].scale().mean();
    }

    std::ifstream js(base_path + ".json");
    if (js) {
        json side;
        js >> side;
        submap.id = side.value("id", 0);
        submap.creation_frame = side.value("creation_frame", 0);
        if (side.contains("anchor_pose")) submap.anchor_pose = pose_from_json(side["anchor_pose"]);
        if (side.contains("keyframe_ids")) {
            submap.keyframe_ids = side["keyframe_ids"].get<std::vector<int>>();
        }
        if (sidecar && side.contains("keyframe_poses")) {
            for (const auto& p : side["keyframe_poses"]) {
                sidecar->keyframe_poses.push_back(pose_from_json(p));
            }
        }
    }
    return submap;
}

}  // namespace varsplat
