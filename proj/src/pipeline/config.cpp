#include "varsplat/pipeline/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "varsplat/core/errors.hpp"

namespace varsplat {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool to_bool(const std::string& v) {
    return v == "1" || v == "true" || v == "yes" || v == "on";
}

}  // namespace

void apply_preset(RunConfig& c, const std::string& preset) {
    c.preset = preset;
    if (preset == "replica") {
        c.tracking.lambda_c = 0.95;
        c.tracking.lr_rot = 0.0002;
        c.tracking.lr_trans = 0.002;
        c.tracking.iter_t = 60;
        c.mapping.iter_m = 100;
        c.tracking.tau = c.loop.tau = c.registration.tau = 10.0;
        c.mapping.seed_budget = 1 << 30;  // all available points
        c.mapping.prune_opacity = 0.1;
        c.loop.percentile = 50.0;
        c.trigger.fixed_interval = 0;
    } else if (preset == "tum") {
        c.tracking.lambda_c = 0.6;
        c.tracking.lr_rot = 0.002;
        c.tracking.lr_trans = 0.01;
        c.tracking.iter_t = 200;
        c.mapping.iter_m = 100;
        c.tracking.tau = c.loop.tau = c.registration.tau = 50.0;
        c.mapping.seed_budget = 30000;
        c.mapping.prune_opacity = 0.5;
        c.loop.percentile = 50.0;
        c.trigger.fixed_interval = 0;
    } else if (preset == "scannet") {
        c.tracking.lambda_c = 0.6;
        c.tracking.lr_rot = 0.002;
        c.tracking.lr_trans = 0.01;
        c.tracking.iter_t = 200;
        c.mapping.iter_m = 100;
        c.tracking.tau = c.loop.tau = c.registration.tau = 5.0;
        c.mapping.seed_budget = 30000;
        c.mapping.prune_opacity = 0.5;
        c.loop.percentile = 50.0;
        c.trigger.fixed_interval = 50;
    } else if (preset == "scannetpp") {
        c.tracking.lambda_c = 0.5;
        c.tracking.lr_rot = 0.002;
        c.tracking.lr_trans = 0.01;
        c.tracking.iter_t = 300;
        c.mapping.iter_m = 500;
        c.tracking.tau = c.loop.tau = c.registration.tau = 10.0;
        c.mapping.seed_budget = 100000;
        c.mapping.prune_opacity = 0.5;
        c.loop.percentile = 33.0;
        c.trigger.fixed_interval = 100;
    } else if (preset == "synthetic") {
        // Desk-scale defaults: small scene, moderate iteration counts.
        c.tracking.lambda_c = 0.7;
        c.tracking.lr_rot = 0.002;
        c.tracking.lr_trans = 0.008;
        c.tracking.iter_t = 24;
        c.mapping.iter_m = 30;
        c.tracking.tau = c.loop.tau = c.registration.tau = 10.0;
        c.mapping.seed_budget = 4000;
        c.mapping.prune_opacity = 0.1;
        c.loop.percentile = 50.0;
        c.trigger.fixed_interval = 0;
    } else {
        throw std::runtime_error("unknown preset: " + preset);
    }
}

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
    const auto num = [&]() { return std::stod(value); };
    const auto integer = [&]() { return std::stoi(value); };

    if (key == "dataset.type") c.dataset_type = value;
    else if (key == "dataset.path") c.dataset_path = value;
    else if (key == "dataset.preset") apply_preset(c, value);
    else if (key == "dataset.max_frames") c.max_frames = integer();
    else if (key == "dataset.downscale") c.downscale = integer();
    else if (key == "dataset.fx") c.intrinsics.fx = num();
    else if (key == "dataset.fy") c.intrinsics.fy = num();
    else if (key == "dataset.cx") c.intrinsics.cx = num();
    else if (key == "dataset.cy") c.intrinsics.cy = num();
    else if (key == "dataset.width") c.intrinsics.width = integer();
    else if (key == "dataset.height") c.intrinsics.height = integer();
    else if (key == "synthetic.room_half_extent") c.synthetic.room_half_extent = num();
    else if (key == "synthetic.room_half_height") c.synthetic.room_half_height = num();
    else if (key == "synthetic.texture_frequency") c.synthetic.texture_frequency = num();
    else if (key == "synthetic.splat_spacing") c.synthetic.splat_spacing = num();
    else if (key == "synthetic.trajectory") c.synthetic.trajectory = value;
    else if (key == "synthetic.frame_count") c.synthetic.frame_count = integer();
    else if (key == "synthetic.width") c.synthetic.width = integer();
    else if (key == "synthetic.height") c.synthetic.height = integer();
    else if (key == "synthetic.focal") c.synthetic.focal = num();
    else if (key == "synthetic.noise_x0") c.synthetic.photo_noise.x0 = num();
    else if (key == "synthetic.noise_y0") c.synthetic.photo_noise.y0 = num();
    else if (key == "synthetic.noise_x1") c.synthetic.photo_noise.x1 = num();
    else if (key == "synthetic.noise_y1") c.synthetic.photo_noise.y1 = num();
    else if (key == "synthetic.noise_stddev") c.synthetic.photo_noise.stddev = num();
    else if (key == "synthetic.depth_dropout") c.synthetic.depth_dropout = num();
    else if (key == "synthetic.reflective_cx") c.synthetic.reflective.center.x() = num();
    else if (key == "synthetic.reflective_cy") c.synthetic.reflective.center.y() = num();
    else if (key == "synthetic.reflective_cz") c.synthetic.reflective.center.z() = num();
    else if (key == "synthetic.reflective_hx") c.synthetic.reflective.half_extent.x() = num();
    else if (key == "synthetic.reflective_hy") c.synthetic.reflective.half_extent.y() = num();
    else if (key == "synthetic.reflective_hz") c.synthetic.reflective.half_extent.z() = num();
    else if (key == "synthetic.reflective_jitter") c.synthetic.reflective.jitter_amplitude = num();
    else if (key == "mapping.lambda_color") c.mapping.lambda_color = num();
    else if (key == "mapping.lambda_depth") c.mapping.lambda_depth = num();
    else if (key == "mapping.lambda_reg") c.mapping.lambda_reg = num();
    else if (key == "mapping.lambda_var") c.mapping.lambda_var = num();
    else if (key == "mapping.lambda_ssim") c.mapping.lambda_ssim = num();
    else if (key == "mapping.iter_m") c.mapping.iter_m = integer();
    else if (key == "mapping.seed_budget") c.mapping.seed_budget = integer();
    else if (key == "mapping.alpha_thre") c.mapping.alpha_thre = num();
    else if (key == "mapping.depth_discrepancy_factor") c.mapping.depth_discrepancy_factor = num();
    else if (key == "mapping.prune_opacity") c.mapping.prune_opacity = num();
    else if (key == "mapping.new_opacity") c.mapping.new_opacity = num();
    else if (key == "mapping.sigma2_init") c.mapping.sigma2_init = num();
    else if (key == "mapping.keyframe_every") c.keyframe_every = integer();
    else if (key == "tracking.lambda_c") c.tracking.lambda_c = num();
    else if (key == "tracking.lr_rot") c.tracking.lr_rot = num();
    else if (key == "tracking.lr_trans") c.tracking.lr_trans = num();
    else if (key == "tracking.iter_t") c.tracking.iter_t = integer();
    else if (key == "tracking.tau") c.tracking.tau = num();
    else if (key == "tracking.inlier_factor") c.tracking.inlier_factor = num();
    else if (key == "tracking.loss_spike_factor") c.tracking.loss_spike_factor = num();
    else if (key == "loop.enabled") c.loop_closure = to_bool(value);
    else if (key == "loop.percentile") c.loop.percentile = num();
    else if (key == "loop.tau") c.loop.tau = num();
    else if (key == "loop.overlap_threshold") c.loop.overlap_threshold = num();
    else if (key == "registration.iterations") c.registration.iterations = integer();
    else if (key == "registration.lr_rot") c.registration.lr_rot = num();
    else if (key == "registration.lr_trans") c.registration.lr_trans = num();
    else if (key == "registration.lr_exposure") c.registration.lr_exposure = num();
    else if (key == "registration.tau") c.registration.tau = num();
    else if (key == "registration.views") c.registration_views = integer();
    else if (key == "pipeline.d_thre") c.trigger.d_thre = num();
    else if (key == "pipeline.theta_thre") c.trigger.theta_thre_deg = num();
    else if (key == "pipeline.fixed_interval") c.trigger.fixed_interval = integer();
    else if (key == "pipeline.output_dir") c.output_dir = value;
    else if (key == "pipeline.threads") c.threads = integer();
    else if (key == "pipeline.global_refine_iterations") c.global_refine_iterations = integer();
    else if (key == "pipeline.inject_drift") c.inject_drift = num();
    else if (key == "pipeline.ate_all_frames") c.ate_all_frames = to_bool(value);
    else if (key == "pipeline.seed") c.seed = std::stoull(value);
    else if (key == "ablation.uncertainty_tracking") c.uncertainty_tracking = to_bool(value);
    else if (key == "ablation.uncertainty_loop") c.uncertainty_loop = to_bool(value);
    else if (key == "ablation.uncertainty_registration")
        c.uncertainty_registration = to_bool(value);
    else throw std::runtime_error("unknown config key: " + key);
}

void parse_config_text(RunConfig& config, const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    while (std::getline(in, line)) {
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("bad config line: " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        apply_override(config, section.empty() ? key : section + "." + key, value);
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig config;
    apply_preset(config, "synthetic");
    parse_config_text(config, buf.str());
    return config;
}

std::string config_to_ini(const RunConfig& c) {
    std::ostringstream os;
    os << "[dataset]\n"
       << "type = " << c.dataset_type << "\n"
       << "path = " << c.dataset_path << "\n"
       << "max_frames = " << c.max_frames << "\n"
       << "downscale = " << c.downscale << "\n"
       << "fx = " << c.intrinsics.fx << "\nfy = " << c.intrinsics.fy << "\n"
       << "cx = " << c.intrinsics.cx << "\ncy = " << c.intrinsics.cy << "\n"
       << "width = " << c.intrinsics.width << "\nheight = " << c.intrinsics.height << "\n"
       << "[synthetic]\n"
       << "trajectory = " << c.synthetic.trajectory << "\n"
       << "frame_count = " << c.synthetic.frame_count << "\n"
       << "splat_spacing = " << c.synthetic.splat_spacing << "\n"
       << "[mapping]\n"
       << "lambda_var = " << c.mapping.lambda_var << "\n"
       << "iter_m = " << c.mapping.iter_m << "\n"
       << "seed_budget = " << c.mapping.seed_budget << "\n"
       << "prune_opacity = " << c.mapping.prune_opacity << "\n"
       << "[tracking]\n"
       << "lambda_c = " << c.tracking.lambda_c << "\n"
       << "iter_t = " << c.tracking.iter_t << "\n"
       << "tau = " << c.tracking.tau << "\n"
       << "[loop]\n"
       << "enabled = " << (c.loop_closure ? "true" : "false") << "\n"
       << "percentile = " << c.loop.percentile << "\n"
       << "[pipeline]\n"
       << "output_dir = " << c.output_dir << "\n"
       << "seed = " << c.seed << "\n"
       << "[ablation]\n"
       << "uncertainty_tracking = " << (c.uncertainty_tracking ? "true" : "false") << "\n"
       << "uncertainty_loop = " << (c.uncertainty_loop ? "true" : "false") << "\n"
       << "uncertainty_registration = " << (c.uncertainty_registration ? "true" : "false")
       << "\n";
    return os.str();
}

}  // namespace varsplat
