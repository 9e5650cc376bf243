#pragma once

#include <map>
#include <string>

#include "varsplat/loop/detect.hpp"
#include "varsplat/loop/registration.hpp"
#include "varsplat/map/mapper.hpp"
#include "varsplat/pipeline/synthetic.hpp"
#include "varsplat/track/tracker.hpp"

namespace varsplat {

// Flat INI-style config: [section] lines and key = value pairs. CLI flags
// override file values, file values override built-in defaults.
struct RunConfig {
    // [dataset]
    std::string dataset_type = "synthetic";  // synthetic | tum
    std::string dataset_path;
    std::string preset = "synthetic";  // synthetic | replica | tum | scannet | scannetpp
    int max_frames = 0;                // 0 = all
    int downscale = 4;
    CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5, 640, 480};

    // [synthetic]
    SyntheticSceneSpec synthetic;

    // [mapping]
    MappingConfig mapping;
    int keyframe_every = 5;

    // [tracking]
    TrackingConfig tracking;

    // [loop]
    bool loop_closure = true;
    LoopDetectConfig loop;

    // [registration]
    RegistrationConfig registration;
    int registration_views = 2;  // top-k overlapping viewpoints

    // [pipeline]
    SubmapTrigger trigger;
    std::string output_dir = "out";
    int threads = 0;  // 0 = hardware default
    int global_refine_iterations = 60;
    double inject_drift = 0.0;  // meters per frame, along +x; test hook
    bool ate_all_frames = false;

    // [ablation]
    bool uncertainty_tracking = true;
    bool uncertainty_loop = true;
    bool uncertainty_registration = true;

    uint64_t seed = 0;

    RenderOptions render_options() const {
        RenderOptions opts;
        if (threads > 0) opts.threads = threads;
        return opts;
    }
};

// Applies per-dataset hyperparameter presets (tracking rates and iterations,
// weighting sharpness, seeding and pruning thresholds).
void apply_preset(RunConfig& config, const std::string& preset);

RunConfig load_config(const std::string& path);
void parse_config_text(RunConfig& config, const std::string& text);

// Applies one "section.key=value" override.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

std::string config_to_ini(const RunConfig& config);

}  // namespace varsplat
