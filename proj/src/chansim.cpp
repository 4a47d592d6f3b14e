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
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctxcsi {

namespace {

constexpr double two_pi = 6.283185307179586;

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0)
        return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

struct OuterWall {
    int axis;     // 0 mirrors x, 1 mirrors y
    double plane; // coordinate of the wall plane
};

// Constructs the image-source path bouncing off one outer wall; returns false
// when the specular point falls outside the wall face or degenerates onto an
// endpoint.
bool reflected_path(const SceneConfig& scene, const Eigen::Vector3d& ap_pos,
                    const Eigen::Vector3d& ue_pos, const OuterWall& wall,
                    Eigen::Vector3d& bounce, double& length) {
    Eigen::Vector3d image = ue_pos;
    image[wall.axis] = 2.0 * wall.plane - ue_pos[wall.axis];

    const double da = ap_pos[wall.axis] - wall.plane;
    const double di = image[wall.axis] - wall.plane;
    const double denom = da - di;
    if (denom == 0.0)
        return false;
    const double t = da / denom;
    if (t <= 0.0 || t >= 1.0)
        return false;

    bounce = ap_pos + t * (image - ap_pos);
    const int other = 1 - wall.axis;
    if (bounce[other] <= 0.0 || bounce[other] >= scene.room_size[other])
        return false;
    if (bounce.z() <= 0.0 || bounce.z() >= scene.room_size.z())
        return false;

    length = (image - ap_pos).norm();
    return true;
}

} // namespace

std::vector<Path> enumerate_paths(const SceneConfig& scene, const ContextVector& context,
                                  int ap_index, bool include_blocker) {
    if (ap_index < 0 || ap_index >= static_cast<int>(scene.aps.size()))
        throw std::invalid_argument("enumerate_paths: ap_index out of range");
    const ApConfig& ap = scene.aps[ap_index];
    const Eigen::Vector3d ue = scene.ue_position(context.ue_xy);
    const std::optional<Eigen::Vector2d> blocker =
        include_blocker ? std::optional<Eigen::Vector2d>(context.blocker_xy) : std::nullopt;

    std::vector<Path> paths;
    paths.reserve(5);

    // line of sight
    {
        Path p;
        p.kind = PathKind::los;
        p.length = (ue - ap.position).norm();
        p.departure_azimuth = aod_azimuth(ap, ue);
        const double amp = scene.wavelength / (4.0 * 3.141592653589793 * p.length);
        const double att = segment_attenuation(scene, ap.position, ue, blocker);
        p.gain = std::polar(amp * att, -two_pi * p.length / scene.wavelength);
        if (std::abs(p.gain) >= 1e-9)
            paths.push_back(p);
    }

    const OuterWall walls[4] = {
        {0, 0.0}, {0, scene.room_size.x()}, {1, 0.0}, {1, scene.room_size.y()}};
    for (int wi = 0; wi < 4; ++wi) {
        Eigen::Vector3d bounce;
        double length = 0.0;
        if (!reflected_path(scene, ap.position, ue, walls[wi], bounce, length))
            continue;
        Path p;
        p.kind = PathKind::reflection;
        p.wall_index = wi;
        p.length = length;
        p.departure_azimuth = aod_azimuth(ap, bounce);
        const double amp = scene.wavelength / (4.0 * 3.141592653589793 * length);
        const double att = segment_attenuation(scene, ap.position, bounce, blocker) *
                           segment_attenuation(scene, bounce, ue, blocker);
        p.gain = std::polar(amp * att, -two_pi * length / scene.wavelength) *
                 scene.reflection_coefficient;
        if (std::abs(p.gain) >= 1e-9)
            paths.push_back(p);
    }
    return paths;
}

Eigen::VectorXcd synth_channel(const SceneConfig& scene, const ContextVector& context,
                               int ap_index, bool include_blocker) {
    const ApConfig& ap = scene.aps[ap_index];
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(ap.num_antennas);
    for (const Path& p : enumerate_paths(scene, context, ap_index, include_blocker))
        h += p.gain * steering_vector(ap.num_antennas, ap.element_spacing, p.departure_azimuth);
    return h;
}

Eigen::VectorXcd add_pilot_noise(const Eigen::VectorXcd& h, double sigma2, Rng& rng) {
    if (sigma2 < 0.0)
        throw std::invalid_argument("add_pilot_noise: sigma2 must be >= 0");
    if (sigma2 == 0.0)
        return h;
    Eigen::VectorXcd y(h.size());
    const double sigma = std::sqrt(sigma2);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        y[i] = h[i] + sigma * rng.cnormal();
    return y;
}

double calibrate_noise(const std::vector<std::vector<Eigen::VectorXcd>>& clean,
                       const SceneConfig& scene, double snr_db) {
    if (clean.empty())
        throw std::invalid_argument("calibrate_noise: empty record list");
    const size_t n_aps = scene.aps.size();
    double mean_power = 0.0;
    for (size_t s = 0; s < n_aps; ++s) {
        double acc = 0.0;
        for (const auto& rec : clean) {
            if (rec.size() != n_aps)
                throw std::invalid_argument("calibrate_noise: record/AP count mismatch");
            acc += rec[s].squaredNorm();
        }
        acc /= static_cast<double>(clean.size());
        mean_power += scene.aps[s].tx_power * acc / scene.aps[s].num_antennas;
    }
    mean_power /= static_cast<double>(n_aps);
    if (mean_power <= 0.0)
        throw std::runtime_error("degenerate dataset");
    return mean_power / std::pow(10.0, snr_db / 10.0);
}

ContextVector draw_context(const SceneConfig& scene, Rng& rng) {
    ContextVector ctx;
    ctx.blocker_xy = {rng.uniform(0.0, scene.room_size.x()), rng.uniform(0.0, scene.room_size.y())};

    const double half = 0.5 * scene.blocker_footprint_side;
    for (;;) {
        ctx.ue_xy = {rng.uniform(0.0, scene.room_size.x()), rng.uniform(0.0, scene.room_size.y())};
        const bool in_blocker = std::abs(ctx.ue_xy.x() - ctx.blocker_xy.x()) < half &&
                                std::abs(ctx.ue_xy.y() - ctx.blocker_xy.y()) < half;
        if (in_blocker)
            continue;
        bool near_ap = false;
        const Eigen::Vector3d ue3 = scene.ue_position(ctx.ue_xy);
        for (const auto& ap : scene.aps)
            near_ap = near_ap || (ue3 - ap.position).norm() < scene.ap_clearance;
        if (near_ap)
            continue;
        bool on_wall = false;
        for (const auto& w : scene.partition_walls)
            on_wall = on_wall || point_segment_distance(ctx.ue_xy, w.a, w.b) < 1e-6;
        if (on_wall)
            continue;
        break;
    }
    return ctx;
}

Dataset generate_dataset(const SceneConfig& scene, int64_t num_samples, double snr_db,
                         uint64_t seed) {
    if (num_samples < 1)
        throw std::invalid_argument("generate_dataset: num_samples must be >= 1");
    scene.validate();

    const size_t n_aps = scene.aps.size();
    Dataset ds;
    ds.scene_hash = scene.hash();
    ds.seed = seed;
    ds.records.resize(num_samples);

    std::vector<std::vector<Eigen::VectorXcd>> clean(num_samples);
    for (int64_t l = 0; l < num_samples; ++l) {
        Rng pos_rng(Rng::derive(seed, static_cast<uint64_t>(l), 0));
        ds.records[l].context = draw_context(scene, pos_rng);
        clean[l].resize(n_aps);
        for (size_t s = 0; s < n_aps; ++s)
            clean[l][s] = synth_channel(scene, ds.records[l].context, static_cast<int>(s));
    }

    ds.noise_variance = calibrate_noise(clean, scene, snr_db);

    for (int64_t l = 0; l < num_samples; ++l) {
        Rng noise_rng(Rng::derive(seed, static_cast<uint64_t>(l), 1));
        ds.records[l].clean = std::move(clean[l]);
        ds.records[l].noisy.resize(n_aps);
        for (size_t s = 0; s < n_aps; ++s)
            ds.records[l].noisy[s] =
                add_pilot_noise(ds.records[l].clean[s], ds.noise_variance, noise_rng);
    }
    return ds;
}

namespace {

template <typename T> void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T> T take(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is)
        throw std::runtime_error("CSD1: truncated file");
    return v;
}

void put_cvec_f32(std::ostream& os, const Eigen::VectorXcd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        put(os, static_cast<float>(v[i].real()));
        put(os, static_cast<float>(v[i].imag()));
    }
}

Eigen::VectorXcd take_cvec_f32(std::istream& is, int n) {
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) {
        const float re = take<float>(is);
        const float im = take<float>(is);
        v[i] = std::complex<double>(re, im);
    }
    return v;
}

} // namespace

void write_dataset_csd1(const Dataset& ds, const SceneConfig& scene, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw std::runtime_error("CSD1: cannot open for writing: " + path);

    os.write("CSD1\0\0\0\0", 8);
    put<uint32_t>(os, 1);
    put<uint32_t>(os, static_cast<uint32_t>(scene.aps.size()));
    for (const auto& ap : scene.aps)
        put<uint32_t>(os, static_cast<uint32_t>(ap.num_antennas));
    put<uint64_t>(os, static_cast<uint64_t>(ds.records.size()));
    put<double>(os, ds.noise_variance);
    put<uint64_t>(os, ds.seed);

    for (const auto& rec : ds.records) {
        put<double>(os, rec.context.ue_xy.x());
        put<double>(os, rec.context.ue_xy.y());
        put<double>(os, rec.context.blocker_xy.x());
        put<double>(os, rec.context.blocker_xy.y());
        for (size_t s = 0; s < scene.aps.size(); ++s) {
            put_cvec_f32(os, rec.clean[s]);
            put_cvec_f32(os, rec.noisy[s]);
        }
    }
    if (!os)
        throw std::runtime_error("CSD1: write failure: " + path);
}

Dataset read_dataset_csd1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("CSD1: cannot open: " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "CSD1\0\0\0\0", 8) != 0)
        throw std::runtime_error("CSD1: bad magic");
    const auto version = take<uint32_t>(is);
    if (version != 1)
        throw std::runtime_error("CSD1: unsupported version");
    const auto n_aps = take<uint32_t>(is);
    if (n_aps == 0 || n_aps > 1024)
        throw std::runtime_error("CSD1: implausible AP count");
    std::vector<int> ns(n_aps);
    for (auto& n : ns)
        n = static_cast<int>(take<uint32_t>(is));
    const auto num_records = take<uint64_t>(is);
    Dataset ds;
    ds.noise_variance = take<double>(is);
    ds.seed = take<uint64_t>(is);

    ds.records.resize(num_records);
    for (auto& rec : ds.records) {
        const double ux = take<double>(is);
        const double uy = take<double>(is);
        const double bx = take<double>(is);
        const double by = take<double>(is);
        rec.context.ue_xy = {ux, uy};
        rec.context.blocker_xy = {bx, by};
        rec.clean.resize(n_aps);
        rec.noisy.resize(n_aps);
        for (uint32_t s = 0; s < n_aps; ++s) {
            rec.clean[s] = take_cvec_f32(is, ns[s]);
            rec.noisy[s] = take_cvec_f32(is, ns[s]);
        }
    }
    return ds;
}

} // namespace ctxcsi
