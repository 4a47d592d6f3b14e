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

#include "ctxcsi/scene.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

namespace ctxcsi {

namespace {

constexpr double two_pi = 6.283185307179586;

// Proper 2-D crossing of open segments (p1, p2) and (q1, q2): both segments
// strictly straddle each other. Touching endpoints do not count.
bool segments_cross(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                    const Eigen::Vector2d& q1, const Eigen::Vector2d& q2, double& t_on_p) {
    const Eigen::Vector2d dp = p2 - p1;
    const Eigen::Vector2d dq = q2 - q1;
    auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
        return u.x() * v.y() - u.y() * v.x();
    };
    const double d1 = cross(dq, p1 - q1);
    const double d2 = cross(dq, p2 - q1);
    const double d3 = cross(dp, q1 - p1);
    const double d4 = cross(dp, q2 - p1);
    if (!((d1 > 0.0) != (d2 > 0.0)) || d1 == 0.0 || d2 == 0.0)
        return false;
    if (!((d3 > 0.0) != (d4 > 0.0)) || d3 == 0.0 || d4 == 0.0)
        return false;
    t_on_p = d1 / (d1 - d2);
    return true;
}

// Slab test: does the open segment (a, b) cross the interior of the
// axis-aligned box [lo, hi]? Grazing contact (zero-length overlap) is no.
bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    double t_enter = 0.0;
    double t_exit = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double d = b[axis] - a[axis];
        if (d == 0.0) {
            if (a[axis] <= lo[axis] || a[axis] >= hi[axis])
                return false;
            continue;
        }
        double t0 = (lo[axis] - a[axis]) / d;
        double t1 = (hi[axis] - a[axis]) / d;
        if (t0 > t1)
            std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
        if (t_enter >= t_exit)
            return false;
    }
    return t_enter < t_exit;
}

void fnv_bytes(uint64_t& h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void fnv_f64(uint64_t& h, double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    fnv_bytes(h, &bits, sizeof(bits));
}

void fnv_u64(uint64_t& h, uint64_t x) { fnv_bytes(h, &x, sizeof(x)); }

} // namespace

SceneConfig SceneConfig::defaults() {
    SceneConfig s;
    s.room_size = {10.0, 10.0, 2.5};
    s.carrier_frequency = 28.0e9;
    s.wavelength = speed_of_light / s.carrier_frequency;
    s.ue_height = 1.5;
    s.blocker_footprint_side = 1.0;
    s.blocker_height = 2.0;
    s.blocker_loss_db = 25.0;
    s.reflection_coefficient = {-0.3, 0.0};

    ApConfig ap1;
    ap1.position = {10.0, 5.0, 2.4};
    ap1.array_normal_azimuth = 3.141592653589793; // broadside -x
    ApConfig ap2;
    ap2.position = {0.0, 5.0, 2.4};
    ap2.array_normal_azimuth = 0.0; // broadside +x
    s.aps = {ap1, ap2};

    s.partition_walls = {WallSegment{{2.0, 5.5}, {2.0, 9.5}, 20.0}};
    return s;
}

void SceneConfig::validate() const {
    if (!(room_size.array() > 0.0).all())
        throw std::invalid_argument("room_size must be positive");
    if (aps.empty())
        throw std::invalid_argument("at least one AP is required");
    for (const auto& ap : aps) {
        if (ap.num_antennas < 1)
            throw std::invalid_argument("num_antennas must be >= 1");
        if (ap.element_spacing <= 0.0)
            throw std::invalid_argument("element_spacing must be > 0");
        if (ap.tx_power <= 0.0)
            throw std::invalid_argument("tx_power must be > 0");
        if ((ap.position.array() < 0.0).any() || (ap.position.array() > room_size.array()).any())
            throw std::invalid_argument("AP position outside the room");
    }
    for (const auto& w : partition_walls) {
        if (w.penetration_loss_db < 0.0)
            throw std::invalid_argument("wall penetration loss must be >= 0");
        if (!inside_room_footprint(w.a) || !inside_room_footprint(w.b))
            throw std::invalid_argument("wall endpoints outside the room");
    }
    if (blocker_footprint_side <= 0.0 || blocker_height <= 0.0 || blocker_loss_db < 0.0)
        throw std::invalid_argument("invalid blocker geometry");
    if (blocker_height > room_size.z())
        throw std::invalid_argument("blocker taller than the room");
    if (ue_height <= 0.0 || ue_height > room_size.z())
        throw std::invalid_argument("invalid UE height");
    if (carrier_frequency <= 0.0)
        throw std::invalid_argument("carrier_frequency must be > 0");
    if (std::abs(wavelength * carrier_frequency - speed_of_light) > 1e-6 * speed_of_light)
        throw std::invalid_argument("wavelength inconsistent with carrier frequency");
    if (std::abs(reflection_coefficient) > 1.0)
        throw std::invalid_argument("|reflection_coefficient| must be <= 1");
}

std::string SceneConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    fnv_f64(h, room_size.x());
    fnv_f64(h, room_size.y());
    fnv_f64(h, room_size.z());
    fnv_u64(h, aps.size());
    for (const auto& ap : aps) {
        fnv_f64(h, ap.position.x());
        fnv_f64(h, ap.position.y());
        fnv_f64(h, ap.position.z());
        fnv_f64(h, ap.array_normal_azimuth);
        fnv_u64(h, static_cast<uint64_t>(ap.num_antennas));
        fnv_f64(h, ap.element_spacing);
        fnv_f64(h, ap.tx_power);
    }
    fnv_u64(h, partition_walls.size());
    for (const auto& w : partition_walls) {
        fnv_f64(h, w.a.x());
        fnv_f64(h, w.a.y());
        fnv_f64(h, w.b.x());
        fnv_f64(h, w.b.y());
        fnv_f64(h, w.penetration_loss_db);
    }
    fnv_f64(h, blocker_footprint_side);
    fnv_f64(h, blocker_height);
    fnv_f64(h, blocker_loss_db);
    fnv_f64(h, ue_height);
    fnv_f64(h, ap_clearance);
    fnv_f64(h, carrier_frequency);
    fnv_f64(h, reflection_coefficient.real());
    fnv_f64(h, reflection_coefficient.imag());

    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

double segment_attenuation(const SceneConfig& scene, const Eigen::Vector3d& a,
                           const Eigen::Vector3d& b,
                           const std::optional<Eigen::Vector2d>& blocker_xy) {
    if ((a - b).squaredNorm() == 0.0)
        throw std::invalid_argument("segment_attenuation: degenerate segment");

    double factor = 1.0;

    const Eigen::Vector2d a2 = a.head<2>();
    const Eigen::Vector2d b2 = b.head<2>();
    for (const auto& w : scene.partition_walls) {
        double t = 0.0;
        if (!segments_cross(a2, b2, w.a, w.b, t))
            continue;
        const double z = a.z() + t * (b.z() - a.z());
        if (z > 0.0 && z < scene.room_size.z())
            factor *= std::pow(10.0, -w.penetration_loss_db / 20.0);
    }

    if (blocker_xy) {
        const double half = 0.5 * scene.blocker_footprint_side;
        const Eigen::Vector3d lo(blocker_xy->x() - half, blocker_xy->y() - half, 0.0);
        const Eigen::Vector3d hi(blocker_xy->x() + half, blocker_xy->y() + half,
                                 scene.blocker_height);
        if (segment_hits_box(a, b, lo, hi))
            factor *= std::pow(10.0, -scene.blocker_loss_db / 20.0);
    }
    return factor;
}

Eigen::VectorXcd steering_vector(int n_antennas, double spacing_wavelengths, double phi) {
    if (n_antennas < 1)
        throw std::invalid_argument("steering_vector: n_antennas must be >= 1");
    Eigen::VectorXcd v(n_antennas);
    const double step = two_pi * spacing_wavelengths * std::sin(phi);
    for (int k = 0; k < n_antennas; ++k)
        v[k] = std::polar(1.0, step * static_cast<double>(k));
    return v;
}

double aod_azimuth(const ApConfig& ap, const Eigen::Vector3d& target) {
    const double dx = target.x() - ap.position.x();
    const double dy = target.y() - ap.position.y();
    if (dx == 0.0 && dy == 0.0 && target.z() == ap.position.z())
        throw std::invalid_argument("aod_azimuth: target coincides with the AP");
    double az = std::remainder(std::atan2(dy, dx) - ap.array_normal_azimuth, two_pi);
    if (az <= -3.141592653589793)
        az += two_pi;
    return az;
}

} // namespace ctxcsi
