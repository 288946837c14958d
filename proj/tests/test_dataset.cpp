#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "flowvo/dataset.hpp"
#include "flowvo/trajectory.hpp"
#include "support/matchers.hpp"
#include "support/synthetic.hpp"

using namespace flowvo;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

fs::path fixture_dir(const std::string& tag) { return fs::path(synth::scratch_dir(tag)); }

void write_basic_lists(const fs::path& dir) {
    write_file(dir / "rgb.txt",
               "# color images\n"
               "# file: sequence\n"
               "1.000000 rgb/1.000000.png\n"
               "1.033333 rgb/1.033333.png\n"
               "1.066666 rgb/1.066666.png\n");
    write_file(dir / "depth.txt",
               "# depth images\n"
               "1.000500 depth/1.000500.png\n"
               "1.033800 depth/1.033800.png\n"
               "1.067000 depth/1.067000.png\n");
}

} // namespace

TEST_CASE("a three-entry fixture loads in timestamp order") {
    const fs::path dir = fixture_dir("ds_basic");
    write_basic_lists(dir);
    const SequenceHandle h = load_sequence(dir);
    REQUIRE(h.rgb.size() == 3);
    REQUIRE(h.depth.size() == 3);
    CHECK(h.rgb[0].timestamp == 1.000000);
    CHECK(h.rgb[2].timestamp == 1.066666);
    CHECK(h.rgb[0].path == (dir / "rgb/1.000000.png").string());
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(h.rgb[i].timestamp > h.rgb[i - 1].timestamp);
        CHECK(h.depth[i].timestamp > h.depth[i - 1].timestamp);
    }
    CHECK_FALSE(h.groundtruth.has_value());
}

TEST_CASE("missing depth.txt is reported by name") {
    const fs::path dir = fixture_dir("ds_nodepth");
    write_file(dir / "rgb.txt", "1.0 rgb/a.png\n");
    try {
        load_sequence(dir);
        FAIL("expected MissingFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingFile);
        CHECK(std::string(e.what()).find("depth.txt") != std::string::npos);
    }
}

TEST_CASE("malformed list lines carry their line number") {
    const fs::path dir = fixture_dir("ds_badline");
    write_file(dir / "rgb.txt", "1.0 rgb/a.png\nnot-a-timestamp rgb/b.png\n");
    write_file(dir / "depth.txt", "1.0 depth/a.png\n");
    try {
        load_sequence(dir);
        FAIL("expected MalformedLine");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedLine);
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("non-increasing timestamps are rejected") {
    const fs::path dir = fixture_dir("ds_order");
    write_file(dir / "rgb.txt", "2.0 rgb/a.png\n1.0 rgb/b.png\n");
    write_file(dir / "depth.txt", "1.0 depth/a.png\n");
    CHECK_THROWS_MATCHES(load_sequence(dir), Error, ErrorMatches(ErrorCode::MalformedLine));
}

TEST_CASE("calibration file overrides the default intrinsics table") {
    const fs::path dir = fixture_dir("ds_calib");
    write_basic_lists(dir);
    write_file(dir / "calibration.txt", "500.0 501.0 320.0 240.0 5000 640 480\n");
    const SequenceHandle h = load_sequence(dir);
    CHECK(h.intrinsics.fx == 500.0);
    CHECK(h.intrinsics.fy == 501.0);
}

TEST_CASE("known dataset names map to their camera presets") {
    const fs::path dir = fixture_dir("rgbd_dataset_freiburg1_xyz");
    write_basic_lists(dir);
    const SequenceHandle h = load_sequence(dir);
    CHECK(h.intrinsics.fx == 517.3);
    CHECK(h.intrinsics.cy == 255.3);
    CHECK(h.intrinsics.depth_scale == 5000.0);
}

TEST_CASE("close timestamps pair and distant ones drop") {
    // rgb 1.000 pairs with depth 1.005; the rgb frame at 2.000 has only a
    // depth at 2.500 nearby, so both stay unmatched.
    const auto pairs = associate_timestamps({1.000, 2.000}, {1.005, 2.500});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].first == 0);
    CHECK(pairs[0].second == 0);
}

TEST_CASE("identical timestamp lists pair one-to-one") {
    std::vector<double> ts;
    for (int i = 0; i < 50; ++i) ts.push_back(1000.0 + i / 30.0);
    const auto pairs = associate_timestamps(ts, ts);
    REQUIRE(pairs.size() == 50);
    for (int i = 0; i < 50; ++i) {
        CHECK(pairs[i].first == i);
        CHECK(pairs[i].second == i);
    }
}

TEST_CASE("exact distance ties resolve toward the earlier depth entry") {
    // offsets of 1/128 s are binary-exact, so both distances tie exactly
    const auto pairs = associate_timestamps({1.0}, {1.0 - 0.0078125, 1.0 + 0.0078125});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].second == 0);
}

TEST_CASE("each entry is used at most once") {
    // Two rgb frames compete for one depth frame; the closer wins.
    const auto pairs = associate_timestamps({1.000, 1.004}, {1.003});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].first == 1);
}

TEST_CASE("identity pose writes the canonical line") {
    const fs::path dir = fixture_dir("ds_ident");
    Trajectory t;
    t.push_back({0.0, SE3Pose::identity()});
    write_trajectory(t, (dir / "traj.txt").string());

    std::ifstream in(dir / "traj.txt");
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line ==
          "0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 1.000000");
}

TEST_CASE("trajectories round-trip within 1e-5") {
    const fs::path dir = fixture_dir("ds_round");
    std::mt19937 rng(64);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Trajectory t;
    for (int i = 0; i < 100; ++i) {
        Twist tw;
        tw.phi = Eigen::Vector3d(u(rng), u(rng), u(rng));
        tw.rho = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0;
        t.push_back({1000.0 + i * 0.1, exp_map(tw)});
    }
    write_trajectory(t, (dir / "traj.txt").string());
    const Trajectory back = read_trajectory((dir / "traj.txt").string());
    REQUIRE(back.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(back[i].timestamp == Catch::Approx(t[i].timestamp).margin(1e-6));
        CHECK((back[i].pose.translation - t[i].pose.translation).norm() < 1e-5);
        const Eigen::Matrix3d dr = back[i].pose.rotation * t[i].pose.rotation.transpose();
        const double angle = std::acos(std::clamp((dr.trace() - 1.0) * 0.5, -1.0, 1.0));
        CHECK(angle < 1e-5);
    }
}

TEST_CASE("bad trajectory lines are rejected") {
    const fs::path dir = fixture_dir("ds_badtraj");

    write_file(dir / "short.txt", "1.0 2.0 3.0\n");
    CHECK_THROWS_MATCHES(read_trajectory((dir / "short.txt").string()), Error,
                         ErrorMatches(ErrorCode::MalformedLine));

    write_file(dir / "nonunit.txt", "1.0 0 0 0 0 0 0 0.5\n");
    CHECK_THROWS_MATCHES(read_trajectory((dir / "nonunit.txt").string()), Error,
                         ErrorMatches(ErrorCode::NonUnitQuaternion));

    CHECK_THROWS_MATCHES(read_trajectory((dir / "absent.txt").string()), Error,
                         ErrorMatches(ErrorCode::MissingFile));
}

TEST_CASE("comment lines and blanks are ignored in trajectories") {
    const fs::path dir = fixture_dir("ds_comments");
    write_file(dir / "traj.txt",
               "# header\n"
               "\n"
               "  # indented comment\n"
               "1.0 0 0 0 0 0 0 1\n");
    const Trajectory t = read_trajectory((dir / "traj.txt").string());
    REQUIRE(t.size() == 1);
    CHECK(t[0].timestamp == 1.0);
}
