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

#ifndef CTXCSI_SCENE_HPP
#define CTXCSI_SCENE_HPP

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace ctxcsi {

// Thin vertical wall inside the room, spanning the full room height.
struct WallSegment {
    Eigen::Vector2d a;
    Eigen::Vector2d b;
    double penetration_loss_db = 20.0;
};

struct ApConfig {
    Eigen::Vector3d position;
    double array_normal_azimuth = 0.0; // broadside direction, radians
    int num_antennas = 32;
    double element_spacing = 0.5; // in wavelengths
    double tx_power = 1.0;
};

// Conditioning input c = [ue^T, blocker^T]^T; heights come from SceneConfig.
struct ContextVector {
    Eigen::Vector2d ue_xy;
    Eigen::Vector2d blocker_xy;
};

// Static environment: room box, mounted APs, partition walls and the moving
// blocker's shape. Immutable after construction; all operations on it are
// pure and safe to call concurrently.
struct SceneConfig {
    Eigen::Vector3d room_size{10.0, 10.0, 2.5}; // width (x), length (y), height (z), meters
    std::vector<ApConfig> aps;
    std::vector<WallSegment> partition_walls;

    double blocker_footprint_side = 1.0;
    double blocker_height = 2.0;
    double blocker_loss_db = 25.0;

    double ue_height = 1.5;
    double ap_clearance = 0.3; // min UE-AP distance when sampling positions

    double carrier_frequency = 28.0e9;
    double wavelength = 0.0; // derived, c0 / f

    std::complex<double> reflection_coefficient{-0.3, 0.0};

    static constexpr double speed_of_light = 299792458.0;

    // Two APs at opposite wall midpoints, one partition wall, 28 GHz, N = 32.
    static SceneConfig defaults();

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;

    // FNV-1a over a canonical binary serialization of every field, hex string.
    std::string hash() const;

    Eigen::Vector3d ue_position(const Eigen::Vector2d& ue_xy) const {
        return {ue_xy.x(), ue_xy.y(), ue_height};
    }

    bool inside_room_footprint(const Eigen::Vector2d& p) const {
        return p.x() >= 0.0 && p.x() <= room_size.x() && p.y() >= 0.0 && p.y() <= room_size.y();
    }
};

// Amplitude factor in (0, 1] for the open segment (a, b): the product of
// 10^(-L/20) penetration factors over every partition wall and, when given,
// the blocker cuboid that the segment crosses. 1.0 when unobstructed.
double segment_attenuation(const SceneConfig& scene, const Eigen::Vector3d& a,
                           const Eigen::Vector3d& b,
                           const std::optional<Eigen::Vector2d>& blocker_xy);

// ULA response, element k = exp(j*2*pi*spacing*k*sin(phi)), phi from broadside.
Eigen::VectorXcd steering_vector(int n_antennas, double spacing_wavelengths, double phi);

// Signed departure azimuth of `target` seen from the AP, relative to the
// array broadside, wrapped to (-pi, pi].
double aod_azimuth(const ApConfig& ap, const Eigen::Vector3d& target);

} // namespace ctxcsi

#endif
