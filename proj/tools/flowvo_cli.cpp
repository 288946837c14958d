// Command-line front end: sequence tracking, trajectory evaluation, a
// two-image matching demo, and a benchmarking mode.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowvo/config.hpp"
#include "flowvo/evaluation.hpp"
#include "flowvo/pipeline.hpp"
#include "flowvo/version.hpp"

namespace {

using namespace flowvo;

int exit_code_for_dataset_error(const Error& e) {
    return e.code() == ErrorCode::ConfigError ? 1 : 2;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot open " + path + " for writing");
    out << content;
}

std::string manifest_text(const std::string& command, const std::string& dataset,
                          const PipelineConfig& cfg, const std::string& out_path,
                          const std::string& report_path) {
    std::ostringstream os;
    os << "# run manifest\n"
       << "tool_version = " << kVersion << '\n'
       << "command = " << command << '\n'
       << "dataset = " << dataset << '\n'
       << "out = " << out_path << '\n'
       << "report = " << report_path << '\n'
       << serialize_config(cfg);
    return os.str();
}

PipelineConfig load_config(const std::string& config_path, unsigned seed, bool seed_set) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (seed_set) cfg.seed = seed;
    validate_config(cfg);
    return cfg;
}

// ---- track ----

struct TrackArgs {
    std::string dataset;
    std::string config_path;
    std::string out = "trajectory.txt";
    std::string report;
    std::string manifest;
    unsigned seed = 0;
    bool seed_set = false;
};

int run_track(const TrackArgs& a) {
    PipelineConfig cfg;
    try {
        cfg = load_config(a.config_path, a.seed, a.seed_set);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const SequenceHandle seq = load_sequence(a.dataset);
        const std::string report_path = a.report.empty() ? a.out + ".report.txt" : a.report;
        const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest" : a.manifest;
        write_text_file(manifest_path,
                        manifest_text("track", a.dataset, cfg, a.out, report_path));

        const RunResult run = run_sequence(seq, cfg);
        write_trajectory(run.trajectory, a.out);
        write_text_file(report_path, format_sidecar_report(run.frames));

        int failed = 0;
        for (const auto& f : run.frames)
            if (f.status == FrameStatus::Failed) ++failed;
        std::printf("frames: %zu  failed: %d\n", run.frames.size(), failed);
        std::printf("mean per-frame: preprocess %.2f  detect %.2f  predict %.2f  track %.2f  "
                    "refine %.2f  solve %.2f  total %.2f ms\n",
                    run.timing.mean.preprocess_ms, run.timing.mean.detect_ms,
                    run.timing.mean.predict_ms, run.timing.mean.track_ms,
                    run.timing.mean.refine_ms, run.timing.mean.solve_ms,
                    run.timing.mean.total_ms());
        std::printf("trajectory: %s\nreport: %s\nmanifest: %s\n", a.out.c_str(),
                    report_path.c_str(), manifest_path.c_str());
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for_dataset_error(e);
    }
}

// ---- eval ----

struct EvalArgs {
    std::string est;
    std::string gt;
    bool align = false;
    int rpe_delta = 1;
    bool rpe_per_second = false;
    std::string kv_path;
    std::string csv_path;
};

int run_eval(const EvalArgs& a) {
    Trajectory est, gt;
    try {
        est = read_trajectory(a.est);
        gt = read_trajectory(a.gt);
    } catch (const Error& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 1;
    }
    try {
        const int delta = a.rpe_per_second ? 30 : a.rpe_delta;
        const EvalReport rep = evaluate(est, gt, a.align, delta);
        std::cout << format_report_text(rep);
        if (!a.kv_path.empty()) write_text_file(a.kv_path, format_report_kv(rep));
        if (!a.csv_path.empty()) {
            std::ostringstream os;
            os << "timestamp,ate_error_m\n";
            char buf[80];
            for (const auto& [ts, err] : ate_series(est, gt, a.align)) {
                std::snprintf(buf, sizeof(buf), "%.6f,%.9f\n", ts, err);
                os << buf;
            }
            write_text_file(a.csv_path, os.str());
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "evaluation error: " << e.what() << '\n';
        if (e.code() == ErrorCode::InsufficientOverlap ||
            e.code() == ErrorCode::DegenerateGeometry)
            return 3;
        return 1;
    }
}

// ---- match ----

struct MatchArgs {
    std::string img_a;
    std::string img_b;
    std::string depth_a;
    std::string calib;
    std::string out = "overlay.pgm";
    bool stats = true;
    unsigned seed = 42;
};

struct PassStats {
    double ratio = 0.0;
    double track_ms = 0.0;
    double refine_ms = 0.0;
    double mean_iterations = 0.0;
    MatchSet matches;
    std::vector<std::size_t> owner;
    std::vector<TrackResult> tracks;
};

PassStats run_pass(const Pyramid& pa, const Pyramid& pb, const std::vector<PixelPoint>& positions,
                   const std::vector<PixelPoint>& guesses, const PipelineConfig& cfg,
                   const CameraIntrinsics& k, unsigned seed) {
    using clock = std::chrono::steady_clock;
    PassStats s;
    auto t0 = clock::now();
    s.tracks = track_all(pa, pb, positions, guesses, cfg.tracker);
    s.track_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();

    MatchSet raw;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (s.tracks[i].status == TrackStatus::Lost) continue;
        const PixelPoint cur = positions[i] + s.tracks[i].movement;
        if (cur.x < 0 || cur.x > k.width - 1 || cur.y < 0 || cur.y > k.height - 1) continue;
        raw.add(positions[i], cur);
        s.owner.push_back(i);
    }

    std::mt19937 rng(seed);
    t0 = clock::now();
    RefineResult refined;
    try {
        refined = refine(raw, k.width, k.height, k.width, k.height, rng, cfg.gms, cfg.ransac);
    } catch (const Error&) {
        refined.matches = raw; // too few matches to verify; report them as-is
    }
    s.refine_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    s.matches = refined.matches;

    s.ratio = positions.empty()
                  ? 0.0
                  : static_cast<double>(s.matches.inlier_count()) / positions.size();
    double iter_sum = 0.0;
    for (const auto& t : s.tracks) iter_sum += t.iterations_used;
    s.mean_iterations = positions.empty() ? 0.0 : iter_sum / positions.size();
    return s;
}

void draw_line(GrayImage& img, PixelPoint a, PixelPoint b, std::uint8_t value) {
    int x0 = static_cast<int>(std::lround(a.x)), y0 = static_cast<int>(std::lround(a.y));
    const int x1 = static_cast<int>(std::lround(b.x)), y1 = static_cast<int>(std::lround(b.y));
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (x0 >= 0 && x0 < img.width && y0 >= 0 && y0 < img.height) img.at(x0, y0) = value;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

int run_match(const MatchArgs& a) {
    GrayImage ia, ib;
    DepthImage da;
    try {
        ia = read_png_gray(a.img_a);
        ib = read_png_gray(a.img_b);
        da = read_png_depth16(a.depth_a);
        if (ia.width != ib.width || ia.height != ib.height || da.width != ia.width ||
            da.height != ia.height)
            throw Error(ErrorCode::InvalidInput, "images must share one size");
    } catch (const Error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    }

    try {
        PipelineConfig cfg;
        CameraIntrinsics k;
        if (!a.calib.empty()) {
            k = parse_intrinsics(a.calib);
        } else {
            k.fx = 525.0;
            k.fy = 525.0;
            k.cx = 319.5;
            k.cy = 239.5;
            k.depth_scale = 5000.0;
            k.width = ia.width;
            k.height = ia.height;
        }

        const Pyramid pa = build_pyramid(clahe(ia, cfg.clahe));
        const Pyramid pb = build_pyramid(clahe(ib, cfg.clahe));

        const auto detected = detect_keypoints(pa, cfg.max_keypoints, nullptr, cfg.detector);
        std::vector<PixelPoint> positions;
        std::vector<std::optional<Landmark>> landmarks;
        positions.reserve(detected.size());
        for (const auto& d : detected) {
            positions.push_back(d.position);
            const int px = static_cast<int>(std::lround(d.position.x));
            const int py = static_cast<int>(std::lround(d.position.y));
            landmarks.push_back(back_project(d.position, da.at(px, py), SE3Pose::identity(), k));
        }

        // Zero-motion pass.
        const PassStats zero = run_pass(pa, pb, positions, positions, cfg, k, a.seed);

        // Bootstrap a pose from the zero-motion survivors, then re-track with
        // projection-predicted guesses.
        SE3Pose bootstrap = SE3Pose::identity();
        PnPProblem prob;
        prob.intrinsics = k;
        prob.initial_pose = bootstrap;
        for (std::size_t r = 0; r < zero.matches.size(); ++r) {
            if (!zero.matches.inlier_mask[r]) continue;
            const std::size_t i = zero.owner[r];
            if (!landmarks[i]) continue;
            prob.landmarks.push_back(*landmarks[i]);
            prob.pixels.push_back(zero.matches.cur_points[r]);
        }
        try {
            bootstrap = solve_pose(prob, cfg.solver).pose;
        } catch (const Error&) {
            // keep identity; the predicted pass degenerates to zero motion
        }

        std::vector<PixelPoint> guesses;
        guesses.reserve(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (landmarks[i]) {
                if (auto px = project(*landmarks[i], bootstrap, k)) {
                    guesses.push_back(*px);
                    continue;
                }
            }
            guesses.push_back(positions[i]);
        }
        const PassStats pred = run_pass(pa, pb, positions, guesses, cfg, k, a.seed);

        if (a.stats) {
            std::printf("keypoints: %zu\n", positions.size());
            std::printf("%-12s %7s %10s %10s %11s\n", "mode", "Ratio", "track_ms", "refine_ms",
                        "mean_iters");
            std::printf("%-12s %7.3f %10.3f %10.3f %11.2f\n", "zero-motion", zero.ratio,
                        zero.track_ms, zero.refine_ms, zero.mean_iterations);
            std::printf("%-12s %7.3f %10.3f %10.3f %11.2f\n", "predicted", pred.ratio,
                        pred.track_ms, pred.refine_ms, pred.mean_iterations);
        }

        // Overlay: image A dimmed, inlier correspondences drawn on top.
        GrayImage overlay = ia;
        for (auto& v : overlay.data) v = static_cast<std::uint8_t>(v / 2);
        for (std::size_t r = 0; r < pred.matches.size(); ++r) {
            if (!pred.matches.inlier_mask[r]) continue;
            draw_line(overlay, pred.matches.ref_points[r], pred.matches.cur_points[r], 255);
        }
        if (a.out.size() >= 4 && a.out.substr(a.out.size() - 4) == ".png")
            write_png_gray8(overlay, a.out);
        else
            write_pgm(overlay, a.out);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

// ---- bench ----

struct BenchArgs {
    std::string dataset;
    std::string config_path;
    int runs = 5;
    unsigned seed = 0;
    bool seed_set = false;
    std::string manifest = "bench.manifest";
};

int run_bench(const BenchArgs& a) {
    PipelineConfig cfg;
    try {
        cfg = load_config(a.config_path, a.seed, a.seed_set);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }
    try {
        const SequenceHandle seq = load_sequence(a.dataset);
        write_text_file(a.manifest, manifest_text("bench", a.dataset, cfg, "", ""));

        std::vector<FrameTimings> run_means;
        int frames = 0;
        for (int r = 0; r < a.runs; ++r) {
            const RunResult run = run_sequence(seq, cfg);
            run_means.push_back(run.timing.mean);
            frames = run.timing.frames;
        }

        auto median_field = [&](double FrameTimings::*field) {
            std::vector<double> v;
            v.reserve(run_means.size());
            for (const auto& m : run_means) v.push_back(m.*field);
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        };

        const double st[6] = {
            median_field(&FrameTimings::preprocess_ms), median_field(&FrameTimings::detect_ms),
            median_field(&FrameTimings::predict_ms),    median_field(&FrameTimings::track_ms),
            median_field(&FrameTimings::refine_ms),     median_field(&FrameTimings::solve_ms)};
        const char* names[6] = {"preprocess", "detect", "predict", "track", "refine", "solve"};

        std::printf("%-12s %10s\n", "stage", "median_ms");
        double total = 0.0;
        for (int i = 0; i < 6; ++i) {
            std::printf("%-12s %10.3f\n", names[i], st[i]);
            total += st[i];
        }
        std::printf("%-12s %10.3f\n", "total", total);
        std::printf("(runs=%d, frames=%d, mean per-frame ms; median across runs)\n", a.runs,
                    frames);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for_dataset_error(e);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"descriptor-free RGB-D visual odometry front end"};
    app.require_subcommand(1);
    app.set_version_flag("--version", flowvo::kVersion);

    TrackArgs ta;
    auto* track = app.add_subcommand("track", "run odometry over a TUM-format sequence");
    track->add_option("dataset", ta.dataset, "dataset directory")->required();
    track->add_option("--config", ta.config_path, "key=value config file");
    track->add_option("--out", ta.out, "trajectory output path");
    track->add_option("--report", ta.report, "sidecar per-frame report path");
    track->add_option("--manifest", ta.manifest, "manifest output path");
    track->add_option("--seed", ta.seed, "RANSAC seed override")
        ->each([&ta](const std::string&) { ta.seed_set = true; });

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "compare a trajectory against ground truth");
    eval->add_option("est", ea.est, "estimated trajectory file")->required();
    eval->add_option("gt", ea.gt, "ground-truth trajectory file")->required();
    eval->add_flag("--align", ea.align, "rigidly align before ATE");
    eval->add_option("--rpe-delta", ea.rpe_delta, "RPE interval in frames (default 1)");
    eval->add_flag("--rpe-per-second", ea.rpe_per_second, "use a 30-frame RPE interval");
    eval->add_option("--kv", ea.kv_path, "write machine-readable key=value report");
    eval->add_option("--csv", ea.csv_path, "write per-frame ATE error series");

    MatchArgs ma;
    auto* match = app.add_subcommand("match", "two-image matching demo with statistics");
    match->add_option("img_a", ma.img_a, "reference image (PNG)")->required();
    match->add_option("img_b", ma.img_b, "current image (PNG)")->required();
    match->add_option("depth_a", ma.depth_a, "reference 16-bit depth (PNG)")->required();
    match->add_option("--calib", ma.calib, "intrinsics file");
    match->add_option("--out", ma.out, "overlay output (.pgm or .png)");
    match->add_option("--seed", ma.seed, "RANSAC seed");
    match->add_flag("!--no-stats", ma.stats, "suppress the statistics table");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "repeat a tracking run and report median timings");
    bench->add_option("dataset", ba.dataset, "dataset directory")->required();
    bench->add_option("--runs", ba.runs, "number of repetitions (default 5)");
    bench->add_option("--config", ba.config_path, "key=value config file");
    bench->add_option("--manifest", ba.manifest, "manifest output path");
    bench->add_option("--seed", ba.seed, "RANSAC seed override")
        ->each([&ba](const std::string&) { ba.seed_set = true; });

    CLI11_PARSE(app, argc, argv);

    if (*track) return run_track(ta);
    if (*eval) return run_eval(ea);
    if (*match) return run_match(ma);
    if (*bench) return run_bench(ba);
    return 0;
}
