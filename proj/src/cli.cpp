#include "trailmark/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "trailmark/config.hpp"
#include "trailmark/dataset.hpp"
#include "trailmark/errors.hpp"
#include "trailmark/eval.hpp"
#include "trailmark/io.hpp"
#include "trailmark/mask.hpp"
#include "trailmark/model.hpp"
#include "trailmark/occlusion.hpp"
#include "trailmark/risk.hpp"
#include "trailmark/synth.hpp"
#include "trailmark/trajectory.hpp"

namespace fs = std::filesystem;

namespace trailmark {

namespace {

struct CliArgs {
    std::string config_path;
    std::string manifest_path;
    std::string checkpoint_path;
    std::string out_dir;
    std::string scene_path;
    std::optional<std::uint64_t> seed;
};

std::ostream& log() { return std::cerr << "[trailmark] "; }

std::string pick_out_dir(const CliArgs& args, const RunConfig& config) {
    return args.out_dir.empty() ? config.output_dir : args.out_dir;
}

/// Runs fn(0..count-1) on a bounded pool. Each job writes only its own
/// result slot, so ordering of outputs never depends on scheduling.
void parallel_frames(int workers, std::size_t count, const std::function<void(std::size_t)>& fn) {
    const int pool = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (pool == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

/// Re-expresses a path stored relative to the input manifest so that it is
/// relative to `out_dir` instead (identical when both directories match).
std::string rebase(const DatasetManifest& m, const std::string& rel, const std::string& out_dir) {
    const fs::path abs = fs::absolute(fs::path(m.base_dir) / rel);
    const fs::path p = fs::proximate(abs, fs::absolute(out_dir));
    return p.empty() ? abs.string() : p.string();
}

DatasetManifest rebased_manifest(const DatasetManifest& m, const std::string& out_dir) {
    DatasetManifest out = m;
    out.base_dir = out_dir;
    out.camera_path = rebase(m, m.camera_path, out_dir);
    out.poses_path = rebase(m, m.poses_path, out_dir);
    out.vehicle_mask_path = rebase(m, m.vehicle_mask_path, out_dir);
    for (FrameRecord& f : out.frames) {
        f.image_path = rebase(m, f.image_path, out_dir);
        f.cloud_path = rebase(m, f.cloud_path, out_dir);
        for (auto& [key, value] : f.extras) value = rebase(m, value, out_dir);
    }
    return out;
}

std::string frame_file(const std::string& stem, const std::string& id, const std::string& ext) {
    return stem + "/frame_" + id + ext;
}

SemanticLabelMap gray_from_unit(const std::vector<double>& values, int width, int height) {
    SemanticLabelMap gray(width, height, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, values[i]));
        gray.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return gray;
}

int cmd_synth(const RunConfig& config, const CliArgs& args) {
    SceneSpec scene = load_scene(args.scene_path);
    if (args.seed) scene.seed = *args.seed;
    const std::string out = pick_out_dir(args, config);
    const std::string manifest = generate_dataset(scene, config.camera, config.wheels,
                                                  config.window, out);
    log() << "synth: wrote " << manifest << "\n";
    return 0;
}

int cmd_label(const RunConfig& config, const CliArgs& args) {
    const DatasetManifest m = load_manifest(args.manifest_path);
    const CameraModel camera = load_camera(resolve_path(m, m.camera_path));
    const std::vector<Pose> poses = load_poses(resolve_path(m, m.poses_path));
    const BinaryMask vehicle = load_mask(resolve_path(m, m.vehicle_mask_path));
    const std::string out = pick_out_dir(args, config);
    fs::create_directories(fs::path(out) / "masks");

    struct FrameResult {
        bool labeled = false;
        std::string mask_rel;
        std::string note;
        std::vector<OcclusionRecord> occlusion;
    };
    std::vector<FrameResult> results(m.frames.size());
    const int spw = config.window.samples_per_wheel();

    parallel_frames(resolve_workers(config), m.frames.size(), [&](std::size_t i) {
        const FrameRecord& frame = m.frames[i];
        FrameResult& r = results[i];
        ProjectedTrajectory traj;
        try {
            traj = project_trajectory(frame.timestamp, poses, config.wheels, camera,
                                      config.window);
        } catch (const InsufficientPosesError& e) {
            r.note = "skipping frame " + frame.id + ": " + e.what();
            return;
        }
        const PointCloud cloud = load_cloud(resolve_path(m, frame.cloud_path));
        const AngularIndex index = build_index(cloud, config.occlusion);
        traj = filter_occlusions(std::move(traj), index, config.occlusion);
        for (int wheel = 0; wheel < 2; ++wheel) {
            for (int s = 0; s < spw; ++s) {
                OcclusionRecord rec;
                rec.frame = static_cast<int>(i);
                rec.sample_index = wheel * spw + s;
                rec.occluded = traj.wheels[wheel][s].occluded ? 1 : 0;
                r.occlusion.push_back(rec);
            }
        }
        BinaryMask mask = rasterize(build_quads(traj), camera.width, camera.height);
        mask = apply_vehicle_mask(mask, vehicle);
        r.mask_rel = frame_file("masks", frame.id, ".pgm");
        save_mask((fs::path(out) / r.mask_rel).string(), mask);
        r.labeled = true;
    });

    DatasetManifest out_m = rebased_manifest(m, out);
    std::vector<OcclusionRecord> occlusion;
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const FrameResult& r = results[i];
        if (!r.note.empty()) log() << "label: " << r.note << "\n";
        if (!r.labeled) continue;
        out_m.frames[i].extras["mask"] = r.mask_rel;
        occlusion.insert(occlusion.end(), r.occlusion.begin(), r.occlusion.end());
        ++labeled;
    }
    save_occlusion_flags((fs::path(out) / "occlusion.txt").string(), occlusion);
    save_manifest((fs::path(out) / "manifest.txt").string(), out_m);
    log() << "label: masked " << labeled << " of " << m.frames.size() << " frames\n";
    return 0;
}

int cmd_train(const RunConfig& config, const CliArgs& args) {
    const DatasetManifest m = load_manifest(args.manifest_path);
    std::vector<TrainSample> dataset;
    for (const FrameRecord& frame : m.frames) {
        const auto it = frame.extras.find("mask");
        if (it == frame.extras.end()) {
            log() << "train: frame " << frame.id << " has no trajectory mask, skipping\n";
            continue;
        }
        TrainSample sample;
        sample.image = load_image(resolve_path(m, frame.image_path));
        sample.mask = load_mask(resolve_path(m, it->second));
        dataset.push_back(std::move(sample));
    }
    if (dataset.empty()) throw EmptyDatasetError("no frames carry trajectory masks");

    ModelConfig mc = config.model;
    TrainConfig tc = config.train;
    if (args.seed) {
        mc.seed = *args.seed;
        tc.seed = *args.seed;
    }
    const TrainResult result = train(dataset, mc, tc);

    const std::string out = pick_out_dir(args, config);
    fs::create_directories(out);
    const std::string checkpoint = args.checkpoint_path.empty()
                                       ? (fs::path(out) / "checkpoint.tmck").string()
                                       : args.checkpoint_path;
    save_checkpoint(checkpoint, result.model);
    save_metrics((fs::path(out) / "metrics.txt").string(), result.metrics);
    log() << "train: " << dataset.size() << " samples, best epoch " << result.model.best_epoch
          << ", validation loss " << fmt_double(result.model.best_val_loss) << "\n";
    log() << "train: wrote " << checkpoint << "\n";
    return 0;
}

int cmd_predict(const RunConfig& config, const CliArgs& args) {
    const DatasetManifest m = load_manifest(args.manifest_path);
    const ReconstructionModel model = load_checkpoint(args.checkpoint_path);
    const std::string out = pick_out_dir(args, config);
    fs::create_directories(fs::path(out) / "risk");
    fs::create_directories(fs::path(out) / "recon");
    fs::create_directories(fs::path(out) / "error");

    const std::size_t n = m.frames.size();
    if (n == 0) throw EmptyDatasetError("manifest lists no frames");
    std::vector<ErrorMap> errors(n);
    std::vector<ImageTensor> recons(n);
    parallel_frames(resolve_workers(config), n, [&](std::size_t i) {
        ImageTensor image = load_image(resolve_path(m, m.frames[i].image_path));
        if (image.width != model.input_width || image.height != model.input_height) {
            image = resize(image, model.input_width, model.input_height);
        }
        recons[i] = reconstruct(model, image);
        errors[i] = error_map(image, recons[i]);
    });

    // Normalization constants are global over the prediction set, computed
    // in manifest order.
    const NormalizationConstants nc = compute_normalization(errors);

    DatasetManifest out_m = rebased_manifest(m, out);
    parallel_frames(resolve_workers(config), n, [&](std::size_t i) {
        const std::string& id = m.frames[i].id;
        const RiskMap risk = normalize(errors[i], nc);
        save_label_map((fs::path(out) / frame_file("risk", id, ".pgm")).string(),
                       gray_from_unit(risk.data, risk.width, risk.height));
        ImageTensor recon = recons[i];
        quantize_to_8bit(recon);
        save_image((fs::path(out) / frame_file("recon", id, ".ppm")).string(), recon);
        // Per-frame min-max scaling: a readable diagnostic even when the
        // global scale saturates.
        double lo = errors[i].data.empty() ? 0.0 : errors[i].data[0], hi = lo;
        for (const double e : errors[i].data) {
            lo = std::min(lo, e);
            hi = std::max(hi, e);
        }
        std::vector<double> scaled(errors[i].data.size(), 0.0);
        if (hi > lo) {
            for (std::size_t k = 0; k < scaled.size(); ++k) {
                scaled[k] = (errors[i].data[k] - lo) / (hi - lo);
            }
        }
        save_label_map((fs::path(out) / frame_file("error", id, ".pgm")).string(),
                       gray_from_unit(scaled, errors[i].width, errors[i].height));
    });
    for (std::size_t i = 0; i < n; ++i) {
        out_m.frames[i].extras["risk"] = frame_file("risk", m.frames[i].id, ".pgm");
        out_m.frames[i].extras["recon"] = frame_file("recon", m.frames[i].id, ".ppm");
    }

    std::ofstream norm((fs::path(out) / "normalization.txt").string());
    norm << "min " << fmt_double(nc.min) << "\n" << "p99 " << fmt_double(nc.p99) << "\n";
    if (!norm) throw DataError("write failed: normalization.txt");
    norm.close();
    save_manifest((fs::path(out) / "manifest.txt").string(), out_m);
    log() << "predict: wrote " << n << " risk maps to " << out << "\n";
    return 0;
}

int cmd_eval(const RunConfig& config, const CliArgs& args) {
    const DatasetManifest m = load_manifest(args.manifest_path);
    std::vector<RiskMap> risks;
    std::vector<SemanticLabelMap> labels;
    for (const FrameRecord& frame : m.frames) {
        const auto rit = frame.extras.find("risk");
        const auto lit = frame.extras.find("label");
        if (rit == frame.extras.end() || lit == frame.extras.end()) {
            log() << "eval: frame " << frame.id << " lacks risk or label, skipping\n";
            continue;
        }
        const SemanticLabelMap gray = load_label_map(resolve_path(m, rit->second));
        RiskMap risk(gray.width, gray.height);
        for (std::size_t k = 0; k < gray.data.size(); ++k) risk.data[k] = gray.data[k] / 255.0;
        SemanticLabelMap label = load_label_map(resolve_path(m, lit->second));
        if (label.width != risk.width || label.height != risk.height) {
            SemanticLabelMap resized(risk.width, risk.height, 0);
            resized.data = resize_nearest_u8(label.data, label.width, label.height, risk.width,
                                             risk.height);
            label = std::move(resized);
        }
        risks.push_back(std::move(risk));
        labels.push_back(std::move(label));
    }
    if (risks.empty()) throw EmptyDatasetError("no frames carry both risk maps and labels");

    std::vector<double> scores;
    std::vector<std::uint8_t> classes;
    if (config.eval_granularity == EvalGranularity::Pixel) {
        pixel_scores(risks, labels, config.label_classes, scores, classes);
    } else {
        image_scores(risks, labels, config.label_classes, scores, classes);
    }
    const double area = auroc(scores, classes);
    const RiskThreshold theta = select_threshold(scores, classes);
    const RocCurve roc = roc_curve(scores, classes);
    const RegionHistograms hist = region_histograms(risks, labels, config.eval_bins,
                                                    config.label_classes);

    // Stack the per-frame maps so the intersection percentages aggregate
    // over the whole set in one pass.
    const int w = risks[0].width;
    int total_h = 0;
    for (const RiskMap& r : risks) total_h += r.height;
    BinaryMask all_high(w, total_h);
    SemanticLabelMap all_labels(w, total_h, config.label_classes.unlabeled);
    int row = 0;
    for (std::size_t i = 0; i < risks.size(); ++i) {
        const BinaryMask high = classify(risks[i], theta.theta);
        std::copy(high.data.begin(), high.data.end(),
                  all_high.data.begin() + static_cast<std::ptrdiff_t>(row) * w);
        std::copy(labels[i].data.begin(), labels[i].data.end(),
                  all_labels.data.begin() + static_cast<std::ptrdiff_t>(row) * w);
        row += risks[i].height;
    }
    IntersectionReport report = intersection_metrics(all_high, all_labels, config.label_classes);
    report.auroc = area;

    const std::string out = pick_out_dir(args, config);
    fs::create_directories(out);
    {
        std::ofstream f((fs::path(out) / "report.txt").string());
        f << "frames " << risks.size() << "\n";
        f << "granularity "
          << (config.eval_granularity == EvalGranularity::Pixel ? "pixel" : "image") << "\n";
        f << "auroc " << fmt_double(area) << "\n";
        f << "theta " << fmt_double(theta.theta) << "\n";
        f << "theta_tpr " << fmt_double(theta.tpr) << "\n";
        f << "theta_fpr " << fmt_double(theta.fpr) << "\n";
        f << "ground_low_risk_percent "
          << (report.ground_low_risk_percent ? fmt_double(*report.ground_low_risk_percent)
                                             : std::string("n/a"))
          << "\n";
        f << "vegetation_high_risk_percent "
          << (report.vegetation_high_risk_percent
                  ? fmt_double(*report.vegetation_high_risk_percent)
                  : std::string("n/a"))
          << "\n";
        if (!f) throw DataError("write failed: report.txt");
    }
    {
        std::ofstream f((fs::path(out) / "roc.txt").string());
        for (const RocPoint& p : roc.points) {
            f << fmt_double(p.fpr) << " " << fmt_double(p.tpr) << "\n";
        }
        if (!f) throw DataError("write failed: roc.txt");
    }
    {
        std::ofstream f((fs::path(out) / "histograms.txt").string());
        f << "lo " << fmt_double(hist.lo) << "\n";
        f << "hi " << fmt_double(hist.hi) << "\n";
        f << "bins " << hist.ground.size() << "\n";
        for (std::size_t b = 0; b < hist.ground.size(); ++b) {
            f << b << " " << hist.ground[b] << " " << hist.vegetation[b] << "\n";
        }
        if (!f) throw DataError("write failed: histograms.txt");
    }
    log() << "eval: auroc " << fmt_double(area) << ", theta " << fmt_double(theta.theta) << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"trailmark: self-supervised traversability pipeline"};
    app.require_subcommand(1);
    CliArgs args;
    std::uint64_t seed_value = 0;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "run configuration file")->required();
        sub->add_option("--out", args.out_dir, "output directory (default: config output_dir)");
        sub->add_option("--seed", seed_value, "override config seeds")
            ->check(CLI::NonNegativeNumber)
            ->each([&](const std::string&) { args.seed = seed_value; });
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth);
    synth->add_option("--scene", args.scene_path, "scene description file")->required();

    CLI::App* label = app.add_subcommand("label", "project and mask wheel trajectories");
    add_common(label);
    label->add_option("--manifest", args.manifest_path, "dataset manifest")->required();

    CLI::App* train = app.add_subcommand("train", "train the reconstruction model");
    add_common(train);
    train->add_option("--manifest", args.manifest_path, "dataset manifest")->required();
    train->add_option("--checkpoint", args.checkpoint_path, "checkpoint output path");

    CLI::App* predict = app.add_subcommand("predict", "emit risk maps and reconstructions");
    add_common(predict);
    predict->add_option("--manifest", args.manifest_path, "dataset manifest")->required();
    predict->add_option("--checkpoint", args.checkpoint_path, "model checkpoint")->required();

    CLI::App* eval = app.add_subcommand("eval", "score risk maps against labels");
    add_common(eval);
    eval->add_option("--manifest", args.manifest_path, "dataset manifest")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        const RunConfig config = load_config(args.config_path);
        if (synth->parsed()) return cmd_synth(config, args);
        if (label->parsed()) return cmd_label(config, args);
        if (train->parsed()) return cmd_train(config, args);
        if (predict->parsed()) return cmd_predict(config, args);
        if (eval->parsed()) return cmd_eval(config, args);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace trailmark
