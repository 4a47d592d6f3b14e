// SPDX-License-Identifier: Apache-2.0
//
// ctxcsi: context-conditioned channel statistics prediction and AP selection
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "ctxcsi/chansim.hpp"

#include <cmath>
#include <cstdio>
#include <doctest.h>
#include <filesystem>
#include <fstream>

using namespace ctxcsi;

namespace {

const Path* find_path(const std::vector<Path>& paths, PathKind kind, int wall = -1) {
    for (const auto& p : paths)
        if (p.kind == kind && (kind == PathKind::los || p.wall_index == wall))
            return &p;
    return nullptr;
}

std::string read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("enumerate_paths: broadside LOS departs at azimuth zero") {
    SceneConfig s = SceneConfig::defaults(); // AP 1 at (10, 5), broadside -x
    ContextVector ctx;
    ctx.ue_xy = {5.0, 5.0};
    ctx.blocker_xy = {9.0, 9.0};
    const auto paths = enumerate_paths(s, ctx, 0);
    const Path* los = find_path(paths, PathKind::los);
    REQUIRE(los != nullptr);
    CHECK(los->departure_azimuth == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("enumerate_paths: image-source length for the y = 10 wall") {
    SceneConfig s = SceneConfig::defaults(); // AP 2 at (0, 5, 2.4)
    ContextVector ctx;
    ctx.ue_xy = {4.0, 5.0};
    ctx.blocker_xy = {9.0, 1.0};
    const auto paths = enumerate_paths(s, ctx, 1);
    const Path* refl = find_path(paths, PathKind::reflection, 3); // wall y = room length
    REQUIRE(refl != nullptr);
    const Eigen::Vector3d image(4.0, 15.0, 1.5); // UE mirrored across y = 10
    CHECK(refl->length ==
          doctest::Approx((s.aps[1].position - image).norm()).epsilon(1e-14));
}

TEST_CASE("enumerate_paths: blocker scales the LOS gain by its penetration factor") {
    SceneConfig s = SceneConfig::defaults();
    s.partition_walls.clear();
    ContextVector blocked, clear;
    blocked.ue_xy = clear.ue_xy = {5.0, 5.0};
    blocked.blocker_xy = {7.5, 5.0}; // on the AP1-UE segment
    clear.blocker_xy = {1.0, 9.0};
    const auto paths_blocked = enumerate_paths(s, blocked, 0);
    const auto paths_clear = enumerate_paths(s, clear, 0);
    const Path* pb = find_path(paths_blocked, PathKind::los);
    const Path* pc = find_path(paths_clear, PathKind::los);
    REQUIRE(pb != nullptr);
    REQUIRE(pc != nullptr);
    CHECK(std::abs(pb->gain) / std::abs(pc->gain) ==
          doctest::Approx(std::pow(10.0, -25.0 / 20.0)).epsilon(1e-12));
}

TEST_CASE("enumerate_paths: gain bound lambda / (4 pi d)") {
    SceneConfig s = SceneConfig::defaults();
    ContextVector ctx;
    ctx.ue_xy = {3.3, 6.1};
    ctx.blocker_xy = {6.0, 2.0};
    for (int ap = 0; ap < 2; ++ap)
        for (const auto& p : enumerate_paths(s, ctx, ap)) {
            CHECK(p.length > 0.0);
            CHECK(std::abs(p.gain) <=
                  s.wavelength / (4.0 * 3.141592653589793 * p.length) * (1.0 + 1e-12));
        }
}

TEST_CASE("synth_channel: single LOS path is gain times ones at broadside") {
    SceneConfig s = SceneConfig::defaults();
    s.partition_walls.clear();
    s.reflection_coefficient = {0.0, 0.0}; // reflections drop below the gain floor
    ContextVector ctx;
    ctx.ue_xy = {5.0, 5.0}; // broadside of AP 1
    ctx.blocker_xy = {1.0, 9.0};
    const auto paths = enumerate_paths(s, ctx, 0);
    REQUIRE(paths.size() == 1);
    const Eigen::VectorXcd h = synth_channel(s, ctx, 0);
    for (int k = 0; k < h.size(); ++k)
        CHECK(std::abs(h[k] - paths[0].gain) <= 1e-18);
}

TEST_CASE("synth_channel: doubling the single-path distance halves the norm") {
    SceneConfig s = SceneConfig::defaults();
    s.partition_walls.clear();
    s.reflection_coefficient = {0.0, 0.0};
    ContextVector near, far;
    near.ue_xy = {8.0, 5.0}; // 2 m from AP 1 in plan
    far.ue_xy = {6.0, 5.0};  // 4 m
    near.blocker_xy = far.blocker_xy = {1.0, 9.0};
    const auto pn = enumerate_paths(s, near, 0);
    const auto pf = enumerate_paths(s, far, 0);
    REQUIRE(pn.size() == 1);
    REQUIRE(pf.size() == 1);
    const Eigen::VectorXcd hn = synth_channel(s, near, 0);
    const Eigen::VectorXcd hf = synth_channel(s, far, 0);
    CHECK(hf.norm() / hn.norm() == doctest::Approx(pn[0].length / pf[0].length).epsilon(1e-12));
    // and the phases rotate with the extra path length
    const double dphi = std::arg(pf[0].gain / pn[0].gain);
    CHECK(std::abs(std::remainder(dphi + 2.0 * 3.141592653589793 *
                                             (pf[0].length - pn[0].length) / s.wavelength,
                                  2.0 * 3.141592653589793)) <= 1e-6);
}

TEST_CASE("synth_channel: invariant to a blocker that crosses no path") {
    SceneConfig s = SceneConfig::defaults();
    ContextVector a, b;
    a.ue_xy = b.ue_xy = {7.0, 4.0};
    // the (0, 0) corner is clear of every LOS and first-bounce segment here
    a.blocker_xy = {0.5, 0.5};
    b.blocker_xy = {0.8, 0.6};
    for (int ap = 0; ap < 2; ++ap) {
        const Eigen::VectorXcd ha = synth_channel(s, a, ap);
        const Eigen::VectorXcd hb = synth_channel(s, b, ap);
        CHECK((ha - hb).norm() == 0.0);
    }
}

TEST_CASE("add_pilot_noise: zero variance copies, fixed seed repeats") {
    Rng rng(9);
    Eigen::VectorXcd h(4);
    h << std::complex<double>(0.1, -0.2), std::complex<double>(0.0, 0.4),
        std::complex<double>(-0.3, 0.0), std::complex<double>(1.0, 1.0);
    Rng r0(1);
    CHECK((add_pilot_noise(h, 0.0, r0) - h).norm() == 0.0);

    Rng r1(42), r2(42);
    const Eigen::VectorXcd y1 = add_pilot_noise(h, 0.5, r1);
    const Eigen::VectorXcd y2 = add_pilot_noise(h, 0.5, r2);
    CHECK((y1 - y2).norm() == 0.0);
    CHECK((y1 - h).norm() > 0.0);
}

TEST_CASE("add_pilot_noise: empirical per-entry variance within 5 percent") {
    const double sigma2 = 0.37;
    Rng rng(123);
    const Eigen::VectorXcd h = Eigen::VectorXcd::Zero(8);
    double acc = 0.0;
    const int draws = 12500; // 1e5 noise entries
    for (int d = 0; d < draws; ++d)
        acc += add_pilot_noise(h, sigma2, rng).squaredNorm();
    const double est = acc / (draws * 8.0);
    CHECK(est > 0.95 * sigma2);
    CHECK(est < 1.05 * sigma2);
}

TEST_CASE("calibrate_noise: closed-form cases and scaling") {
    SceneConfig s = SceneConfig::defaults();
    s.aps.resize(1);
    s.aps[0].num_antennas = 4;
    s.aps[0].tx_power = 1.0;

    // one record with ||h||^2 / N = 1
    std::vector<std::vector<Eigen::VectorXcd>> recs(1);
    recs[0].push_back(Eigen::VectorXcd::Ones(4));
    CHECK(calibrate_noise(recs, s, 10.0) == doctest::Approx(0.1).epsilon(1e-12));

    recs[0][0] = Eigen::VectorXcd::Ones(4) * std::sqrt(2.0);
    CHECK(calibrate_noise(recs, s, 0.0) == doctest::Approx(2.0).epsilon(1e-12));

    const double alpha = 1.7;
    const double base = calibrate_noise(recs, s, 7.0);
    recs[0][0] *= alpha;
    CHECK(calibrate_noise(recs, s, 7.0) == doctest::Approx(alpha * alpha * base).epsilon(1e-12));

    recs[0][0] = Eigen::VectorXcd::Zero(4);
    CHECK_THROWS_WITH_AS(calibrate_noise(recs, s, 10.0), "degenerate dataset",
                         std::runtime_error);
}

TEST_CASE("generate_dataset: single record, finite calibration") {
    SceneConfig s = SceneConfig::defaults();
    const Dataset ds = generate_dataset(s, 1, 10.0, 7);
    REQUIRE(ds.records.size() == 1);
    CHECK(std::isfinite(ds.noise_variance));
    CHECK(ds.noise_variance > 0.0);
    CHECK(ds.records[0].clean.size() == 2);
    CHECK(ds.records[0].noisy.size() == 2);
}

TEST_CASE("generate_dataset: record streams derive from (seed, index)") {
    SceneConfig s = SceneConfig::defaults();
    const Dataset ds = generate_dataset(s, 40, 10.0, 2024);
    // regenerating any single record's context from its stream matches
    for (int64_t l : {0L, 13L, 39L}) {
        Rng rng(Rng::derive(2024, static_cast<uint64_t>(l), 0));
        const ContextVector ctx = draw_context(s, rng);
        CHECK(ctx.ue_xy == ds.records[l].context.ue_xy);
        CHECK(ctx.blocker_xy == ds.records[l].context.blocker_xy);
    }
}

TEST_CASE("generate_dataset: empirical SNR within 0.2 dB of the target") {
    SceneConfig s = SceneConfig::defaults();
    const double target = 10.0;
    const Dataset ds = generate_dataset(s, 1500, target, 5);
    for (size_t ap = 0; ap < 2; ++ap) {
        double power = 0.0;
        for (const auto& rec : ds.records)
            power += rec.clean[ap].squaredNorm();
        power /= static_cast<double>(ds.records.size());
        const double snr = 10.0 * std::log10(s.aps[ap].tx_power * power /
                                             (s.aps[ap].num_antennas * ds.noise_variance));
        CHECK(std::abs(snr - target) <= 0.2);
    }
}

TEST_CASE("generate_dataset: UE rejection rules hold") {
    SceneConfig s = SceneConfig::defaults();
    const Dataset ds = generate_dataset(s, 500, 10.0, 31);
    const double half = 0.5 * s.blocker_footprint_side;
    for (const auto& rec : ds.records) {
        CHECK(s.inside_room_footprint(rec.context.ue_xy));
        CHECK(s.inside_room_footprint(rec.context.blocker_xy));
        const bool inside_blocker =
            std::abs(rec.context.ue_xy.x() - rec.context.blocker_xy.x()) < half &&
            std::abs(rec.context.ue_xy.y() - rec.context.blocker_xy.y()) < half;
        CHECK(!inside_blocker);
    }
}

TEST_CASE("CSD1: write/read round trip") {
    SceneConfig s = SceneConfig::defaults();
    s.aps[0].num_antennas = 4;
    s.aps[1].num_antennas = 4;
    const Dataset ds = generate_dataset(s, 25, 10.0, 77);

    const auto dir = std::filesystem::temp_directory_path() / "ctxcsi_csd1_test";
    std::filesystem::create_directories(dir);
    const std::string p1 = (dir / "a.csd1").string();
    const std::string p2 = (dir / "b.csd1").string();

    write_dataset_csd1(ds, s, p1);
    const Dataset back = read_dataset_csd1(p1);
    REQUIRE(back.records.size() == ds.records.size());
    CHECK(back.noise_variance == ds.noise_variance);
    CHECK(back.seed == ds.seed);
    CHECK(back.records[3].context.ue_xy == ds.records[3].context.ue_xy);

    // a second pass through the container is byte-stable (f32 fixed point)
    write_dataset_csd1(back, s, p2);
    CHECK(read_bytes(p1) == read_bytes(p2));

    // header magic
    const std::string bytes = read_bytes(p1);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.compare(0, 4, "CSD1") == 0);

    std::filesystem::remove_all(dir);
}

TEST_CASE("CSD1: same seed, byte-identical files") {
    SceneConfig s = SceneConfig::defaults();
    s.aps[0].num_antennas = 8;
    s.aps[1].num_antennas = 8;
    const auto dir = std::filesystem::temp_directory_path() / "ctxcsi_csd1_det";
    std::filesystem::create_directories(dir);
    const std::string p1 = (dir / "a.csd1").string();
    const std::string p2 = (dir / "b.csd1").string();
    write_dataset_csd1(generate_dataset(s, 30, 10.0, 99), s, p1);
    write_dataset_csd1(generate_dataset(s, 30, 10.0, 99), s, p2);
    CHECK(read_bytes(p1) == read_bytes(p2));
    std::filesystem::remove_all(dir);
}
