#include "varsplat/pipeline/slam.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "varsplat/core/errors.hpp"
#include "varsplat/io/pfm.hpp"
#include "varsplat/io/png_io.hpp"
#include "varsplat/io/tum.hpp"
#include "varsplat/loop/pose_graph.hpp"
#include "varsplat/track/tracker.hpp"
#include "varsplat/uncertainty/weights.hpp"

namespace varsplat {

namespace {

using nlohmann::json;

struct SubmapRecord {
    Submap submap;
    std::vector<int> keyframe_records;  // indices into the keyframe list
    SubmapDescriptor descriptor;
    std::vector<SE3Pose> kf_local_poses;
    std::vector<double> kf_depths;  // median observed depth per keyframe
};

struct FramePoseRecord {
    double timestamp = 0.0;
    int slot = 0;
    SE3Pose local;
};

double median_valid_depth(const ImageF& depth) {
    std::vector<double> vals;
    for (float d : depth.data) {
        if (d > 0.f) vals.push_back(d);
    }
    if (vals.empty()) return 1.5;
    return lower_median(std::move(vals));
}

struct Pipeline {
    const RunConfig& cfg;
    RenderOptions opts;
    std::mt19937 rng;

    std::vector<Frame> frames;
    Trajectory ground_truth;

    std::vector<SubmapRecord> finalized;
    Submap active;
    std::vector<int> active_kf_records;
    SplatAdam active_adam;

    std::vector<KeyframeRecord> keyframes;
    std::vector<FramePoseRecord> frame_poses;
    std::vector<PoseGraphEdge> edges;
    json loop_report = json::array();
    size_t loop_edges = 0;
    size_t reinit_count = 0;
    std::vector<TrackingLogRow> tracking_log;
    std::vector<LossTrace> mapping_traces;
    double running_avg = -1.0;
    int submap_drift_events = 0;

    explicit Pipeline(const RunConfig& config)
        : cfg(config), opts(config.render_options()), rng(static_cast<unsigned>(config.seed)),
          active_adam(config.mapping.rates) {}

    const SE3Pose& anchor_of(int slot) const {
        if (slot < static_cast<int>(finalized.size())) return finalized[slot].submap.anchor_pose;
        return active.anchor_pose;
    }
    SE3Pose world_pose(const FramePoseRecord& r) const {
        return pose_compose(anchor_of(r.slot), r.local);
    }
    SE3Pose keyframe_world(const KeyframeRecord& r) const {
        return pose_compose(anchor_of(r.submap_slot), r.local_pose);
    }

    std::vector<KeyframeView> active_views() const {
        std::vector<KeyframeView> views;
        for (int idx : active_kf_records) {
            const KeyframeRecord& r = keyframes[idx];
            views.push_back({&frames[r.frame_index], keyframe_world(r), r.frame_index});
        }
        return views;
    }

    void add_keyframe(int frame_index, const SE3Pose& world) {
        KeyframeRecord rec;
        rec.frame_index = frame_index;
        rec.submap_slot = static_cast<int>(finalized.size());
        rec.local_pose = pose_compose(pose_inverse(active.anchor_pose), world);
        keyframes.push_back(rec);
        active_kf_records.push_back(static_cast<int>(keyframes.size() - 1));
        active.keyframe_ids.push_back(frame_index);
    }

    void start_submap(SE3Pose anchor, int frame_index) {
        if (cfg.inject_drift != 0.0 && frame_index > 0) {
            ++submap_drift_events;
            anchor.translation.x() += cfg.inject_drift;
        }
        active = Submap{};
        active.id = static_cast<int>(finalized.size());
        active.anchor_pose = anchor;
        active.creation_frame = frame_index;
        active_kf_records.clear();
        active_adam.reset();

        add_keyframe(frame_index, anchor);
        seed_from_frame(frames[frame_index], anchor, active, cfg.mapping, rng, opts);
        mapping_traces.push_back(
            optimize_submap(active, active_views(), cfg.mapping, active_adam, opts));
    }

    void map_keyframe(int frame_index, const SE3Pose& world) {
        add_keyframe(frame_index, world);
        try {
            seed_from_frame(frames[frame_index], world, active, cfg.mapping, rng, opts);
        } catch (const NoValidDepth&) {
            // Depth-free frame still contributes color supervision.
        }
        mapping_traces.push_back(
            optimize_submap(active, active_views(), cfg.mapping, active_adam, opts));
    }

    void finalize_active() {
        prune(active, cfg.mapping.prune_opacity);

        SubmapRecord record;
        record.keyframe_records = active_kf_records;
        for (int idx : active_kf_records) {
            const KeyframeRecord& kf = keyframes[idx];
            record.kf_local_poses.push_back(kf.local_pose);
            record.kf_depths.push_back(median_valid_depth(frames[kf.frame_index].depth));
            const SE3Pose world = pose_compose(active.anchor_pose, kf.local_pose);
            const RenderOutput render =
                rasterize(active, world, frames[kf.frame_index].intrinsics, opts);
            record.descriptor.keyframe_descriptors.push_back(image_descriptor(render.color));
            record.descriptor.keyframe_ids.push_back(kf.frame_index);
        }
        record.submap = std::move(active);
        finalized.push_back(std::move(record));

        const size_t n = finalized.size();
        if (n >= 2) {
            PoseGraphEdge edge;
            edge.i = static_cast<int>(n - 2);
            edge.j = static_cast<int>(n - 1);
            edge.relative = pose_compose(pose_inverse(finalized[n - 2].submap.anchor_pose),
                                         finalized[n - 1].submap.anchor_pose);
            edge.weight = 1.0;
            edges.push_back(edge);
        }
    }

    LoopEntry make_entry(const SubmapRecord& record) const {
        LoopEntry entry;
        entry.submap = &record.submap;
        entry.descriptor = record.descriptor;
        entry.keyframe_depths = record.kf_depths;
        entry.intrinsics = frames.front().intrinsics;
        for (const SE3Pose& local : record.kf_local_poses) {
            entry.keyframe_poses.push_back(pose_compose(record.submap.anchor_pose, local));
        }
        return entry;
    }

    // Loop detection + registration + pose graph for the latest finalized
    // submap. Returns true when anchors moved.
    bool close_loops() {
        if (!cfg.loop_closure || finalized.size() < 3) return false;
        const size_t query_idx = finalized.size() - 1;
        const LoopEntry query = make_entry(finalized[query_idx]);

        std::vector<LoopEntry> database;
        std::vector<size_t> db_index;
        for (size_t i = 0; i + 2 <= query_idx; ++i) {  // exclude self and predecessor
            database.push_back(make_entry(finalized[i]));
            db_index.push_back(i);
        }
        if (database.empty()) return false;

        LoopDetectConfig detect_cfg = cfg.loop;
        detect_cfg.use_uncertainty = cfg.uncertainty_loop;
        const std::vector<LoopCandidate> candidates =
            detect_loops(query, database, detect_cfg);

        bool added = false;
        for (const LoopCandidate& cand : candidates) {
            json entry{{"query", cand.query_submap}, {"db", cand.db_submap},
                       {"raw_sim", cand.raw_sim},   {"r_q", cand.r_q},
                       {"r_db", cand.r_db},         {"rescored_sim", cand.rescored_sim},
                       {"overlap", cand.overlap_ratio}, {"accepted", cand.accepted}};
            if (cand.accepted && !added) {
                size_t db_slot = 0;
                for (size_t i = 0; i < db_index.size(); ++i) {
                    if (finalized[db_index[i]].submap.id == cand.db_submap) db_slot = db_index[i];
                }
                try {
                    const RegistrationResult reg = register_loop(finalized[db_slot],
                                                                 finalized[query_idx]);
                    PoseGraphEdge edge;
                    edge.i = static_cast<int>(db_slot);
                    edge.j = static_cast<int>(query_idx);
                    edge.relative =
                        pose_compose(pose_inverse(finalized[db_slot].submap.anchor_pose),
                                     pose_compose(reg.relative,
                                                  finalized[query_idx].submap.anchor_pose));
                    edge.weight = cfg.uncertainty_loop ? cand.r_q * cand.r_db : 1.0;
                    edges.push_back(edge);
                    ++loop_edges;
                    added = true;
                    const auto& t = reg.relative.translation;
                    entry["relative_pose"] = {t.x(), t.y(), t.z()};
                    entry["registration_final_loss"] = reg.final_loss;
                } catch (const std::exception& e) {
                    entry["registration_error"] = e.what();
                }
            }
            loop_report.push_back(entry);
        }
        if (!added) return false;

        PoseGraph graph;
        for (const SubmapRecord& r : finalized) graph.nodes.push_back(r.submap.anchor_pose);
        graph.edges = edges;
        try {
            const std::vector<SE3Pose> corrected = pose_graph_optimize(graph);
            for (size_t i = 0; i < finalized.size(); ++i) {
                finalized[i].submap.anchor_pose = corrected[i];
            }
            return true;
        } catch (const SingularSystem& e) {
            std::cerr << "pose graph: " << e.what() << "\n";
            return false;
        }
    }

    // Registers the query submap's best-matching keyframes against the db
    // submap (top-k by descriptor similarity).
    RegistrationResult register_loop(const SubmapRecord& db, const SubmapRecord& query) {
        std::vector<std::pair<double, size_t>> ranked;
        for (size_t i = 0; i < query.descriptor.keyframe_descriptors.size(); ++i) {
            double best = -1.0;
            for (const auto& d : db.descriptor.keyframe_descriptors) {
                best = std::max(best, query.descriptor.keyframe_descriptors[i].dot(d));
            }
            ranked.emplace_back(best, i);
        }
        std::sort(ranked.begin(), ranked.end(), std::greater<>());

        std::vector<KeyframeView> views;
        const size_t k = std::min<size_t>(cfg.registration_views, ranked.size());
        for (size_t i = 0; i < k; ++i) {
            const size_t kf_slot = ranked[i].second;
            const int rec_idx = query.keyframe_records[kf_slot];
            const KeyframeRecord& rec = keyframes[rec_idx];
            views.push_back({&frames[rec.frame_index],
                             pose_compose(query.submap.anchor_pose, rec.local_pose),
                             rec.frame_index});
        }
        RegistrationConfig reg_cfg = cfg.registration;
        reg_cfg.use_uncertainty = cfg.uncertainty_registration;
        return register_submaps(db.submap, views, SE3Pose::identity(), reg_cfg, opts);
    }

    void run() {
        TrackingConfig track_cfg = cfg.tracking;
        track_cfg.use_uncertainty = cfg.uncertainty_tracking;

        start_submap(SE3Pose::identity(), 0);
        frame_poses.push_back({frames[0].timestamp, 0, SE3Pose::identity()});

        std::vector<SE3Pose> history{anchor_of(0)};

        for (size_t k = 1; k < frames.size(); ++k) {
            const SE3Pose init = predict_pose(history);
            TrackResult result;
            try {
                result = track_frame(active, frames[k], init, track_cfg, history, running_avg,
                                     opts);
            } catch (const EmptyOverlap&) {
                result.pose = init;
                result.reinitialized = true;
            }
            if (result.reinitialized) ++reinit_count;
            running_avg = running_avg < 0.0
                              ? result.final_loss
                              : 0.9 * running_avg + 0.1 * result.final_loss;

            tracking_log.push_back({static_cast<int>(k), result.iterations_run,
                                    result.final_loss, result.inlier_fraction,
                                    result.mean_weight, result.reinitialized});

            const int slot = static_cast<int>(finalized.size());
            frame_poses.push_back(
                {frames[k].timestamp, slot,
                 pose_compose(pose_inverse(active.anchor_pose), result.pose)});

            const int since_creation = static_cast<int>(k) - active.creation_frame;
            if (should_start_submap(result.pose, active.anchor_pose, since_creation,
                                    cfg.trigger)) {
                finalize_active();
                close_loops();
                const SE3Pose corrected = world_pose(frame_poses.back());
                start_submap(corrected, static_cast<int>(k));
            } else if (since_creation % cfg.keyframe_every == 0) {
                map_keyframe(static_cast<int>(k), result.pose);
            }

            history.push_back(world_pose(frame_poses.back()));
            if (history.size() > 4) history.erase(history.begin());
        }

        finalize_active();
        close_loops();
    }

    RunResult finish() {
        RunResult out;

        std::vector<KeyframeView> all_views;
        std::vector<SE3Pose> anchors;
        std::vector<Submap> submaps;
        for (const SubmapRecord& r : finalized) {
            anchors.push_back(r.submap.anchor_pose);
            submaps.push_back(r.submap);
        }
        for (const KeyframeRecord& r : keyframes) {
            all_views.push_back({&frames[r.frame_index], keyframe_world(r), r.frame_index});
        }
        out.merged = global_refine(submaps, anchors, all_views, cfg.global_refine_iterations,
                                   cfg.mapping, opts);

        for (const FramePoseRecord& r : frame_poses) {
            out.trajectory.push(r.timestamp, world_pose(r));
        }
        for (const KeyframeRecord& r : keyframes) {
            out.keyframe_trajectory.push(frames[r.frame_index].timestamp, keyframe_world(r));
        }
        out.keyframes = keyframes;
        out.submaps = std::move(submaps);
        for (const SubmapRecord& r : finalized) {
            SubmapSidecar side;
            for (const SE3Pose& local : r.kf_local_poses) {
                side.keyframe_poses.push_back(pose_compose(r.submap.anchor_pose, local));
            }
            out.sidecars.push_back(std::move(side));
        }
        out.tracking_log = std::move(tracking_log);
        out.mapping_traces = std::move(mapping_traces);
        out.loop_report_json = loop_report.dump(2);
        out.loop_edges = loop_edges;
        out.reinit_count = reinit_count;
        out.ground_truth = std::move(ground_truth);
        out.frames = std::move(frames);
        return out;
    }
};

json build_metrics_json(const RunConfig& cfg, const RunResult& r) {
    return json{{"ate_rmse_cm", r.ate.rmse_cm},
                {"ate_frames", r.ate.associated},
                {"psnr_db", r.render_metrics.psnr_db},
                {"ssim", r.render_metrics.ssim},
                {"depth_l1_cm", r.render_metrics.depth_l1_cm},
                {"n_frames", r.trajectory.size()},
                {"n_keyframes", r.keyframes.size()},
                {"n_submaps", r.submaps.size()},
                {"n_loop_edges", r.loop_edges},
                {"n_splats_merged", r.merged.size()},
                {"reinit_count", r.reinit_count},
                {"runtime_seconds", r.runtime_seconds},
                {"seed", cfg.seed}};
}

}  // namespace

RunResult run_slam(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();

    Pipeline pipeline(config);
    if (config.dataset_type == "synthetic") {
        SyntheticData data =
            generate_synthetic(config.synthetic, config.seed, config.render_options());
        pipeline.frames = std::move(data.frames);
        pipeline.ground_truth = std::move(data.ground_truth);
    } else if (config.dataset_type == "tum") {
        TumDataset data = load_tum_dataset(config.dataset_path, config.intrinsics,
                                           config.max_frames, config.downscale);
        if (data.dropped_frames > 0) {
            std::cerr << "tum: dropped " << data.dropped_frames << " unmatched frames\n";
        }
        pipeline.frames = std::move(data.frames);
        pipeline.ground_truth = std::move(data.ground_truth);
    } else {
        throw std::runtime_error("unknown dataset type: " + config.dataset_type);
    }
    if (pipeline.frames.empty()) throw std::runtime_error("dataset has no frames");

    pipeline.run();
    RunResult result = pipeline.finish();

    // Evaluation at corrected keyframe poses.
    if (!result.ground_truth.empty()) {
        try {
            result.ate = eval_ate(config.ate_all_frames ? result.trajectory
                                                        : result.keyframe_trajectory,
                                  result.ground_truth);
        } catch (const InsufficientPoses&) {
        }
    }
    if (!result.merged.empty()) {
        std::vector<ImageF> renders, targets, rdepths, tdepths;
        const RenderOptions opts = config.render_options();
        for (const KeyframeRecord& kf : result.keyframes) {
            const Frame& frame = result.frames[kf.frame_index];
            const SE3Pose pose = pose_compose(result.submaps[kf.submap_slot].anchor_pose,
                                              kf.local_pose);
            const RenderOutput render = rasterize(result.merged, pose, frame.intrinsics, opts);
            ImageF color(frame.intrinsics.width, frame.intrinsics.height, 3);
            ImageF depth(frame.intrinsics.width, frame.intrinsics.height, 1);
            for (size_t i = 0; i < color.data.size(); ++i) {
                color.data[i] = static_cast<float>(std::clamp(render.color.data[i], 0.0, 1.0));
            }
            for (size_t i = 0; i < depth.data.size(); ++i) {
                depth.data[i] = static_cast<float>(render.depth.data[i]);
            }
            renders.push_back(std::move(color));
            targets.push_back(frame.color);
            rdepths.push_back(std::move(depth));
            tdepths.push_back(frame.depth);
        }
        result.render_metrics = eval_render(renders, targets, rdepths, tdepths);
    }

    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.metrics_json = build_metrics_json(config, result).dump(2);
    return result;
}

void export_results(const RunConfig& config, const RunResult& result) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    save_trajectory_tum((dir / "trajectory.txt").string(), result.trajectory);
    save_trajectory_tum((dir / "keyframes.txt").string(), result.keyframe_trajectory);
    if (!result.ground_truth.empty()) {
        save_trajectory_tum((dir / "groundtruth.txt").string(), result.ground_truth);
    }

    {
        std::ofstream out(dir / "metrics.json");
        out << result.metrics_json << "\n";
    }
    {
        std::ofstream out(dir / "loop_report.json");
        out << result.loop_report_json << "\n";
    }
    {
        std::ofstream out(dir / "config.ini");
        out << config_to_ini(config);
    }
    {
        std::ofstream out(dir / "tracking.csv");
        out << "frame,iterations,final_loss,inlier_fraction,mean_weight,reinitialized\n";
        for (const TrackingLogRow& r : result.tracking_log) {
            out << r.frame << "," << r.iterations << "," << r.final_loss << ","
                << r.inlier_fraction << "," << r.mean_weight << "," << (r.reinitialized ? 1 : 0)
                << "\n";
        }
    }
    {
        std::ofstream out(dir / "mapping_loss.csv");
        out << "event,iteration,l_color,l_depth,l_reg,l_var\n";
        for (size_t e = 0; e < result.mapping_traces.size(); ++e) {
            for (const LossTraceRow& row : result.mapping_traces[e]) {
                out << e << "," << row.iteration << "," << row.l_color << "," << row.l_depth
                    << "," << row.l_reg << "," << row.l_var << "\n";
            }
        }
    }

    char name[64];
    for (size_t i = 0; i < result.submaps.size(); ++i) {
        std::snprintf(name, sizeof(name), "submap_%03zu", i);
        save_submap((dir / name).string(), result.submaps[i],
                    i < result.sidecars.size() ? result.sidecars[i] : SubmapSidecar{});
    }
    save_submap((dir / "merged").string(), result.merged);

    const RenderOptions opts = config.render_options();
    for (const KeyframeRecord& kf : result.keyframes) {
        const Frame& frame = result.frames[kf.frame_index];
        const SE3Pose pose =
            pose_compose(result.submaps[kf.submap_slot].anchor_pose, kf.local_pose);
        const RenderOutput render = rasterize(result.merged, pose, frame.intrinsics, opts);
        std::snprintf(name, sizeof(name), "kf_%05d", kf.frame_index);
        const std::string base = (dir / name).string();
        save_png_color(base + "_color.png", render.color);
        write_pfm(base + "_depth.pfm", render.depth);
        write_pfm(base + "_alpha.pfm", render.alpha);
        write_pfm(base + "_variance.pfm", render.variance);
        ImageD var_scalar(render.variance.width, render.variance.height, 1);
        for (int y = 0; y < var_scalar.height; ++y) {
            for (int x = 0; x < var_scalar.width; ++x) {
                var_scalar.at(x, y) = (render.variance.at(x, y, 0) + render.variance.at(x, y, 1) +
                                       render.variance.at(x, y, 2)) /
                                      3.0;
            }
        }
        save_png_falsecolor(base + "_variance.png", var_scalar);
    }
}

}  // namespace varsplat
