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

#ifndef CTXCSI_CHANSIM_HPP
#define CTXCSI_CHANSIM_HPP

#include "ctxcsi/rng.hpp"
#include "ctxcsi/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ctxcsi {

enum class PathKind { los, reflection };

struct Path {
    PathKind kind = PathKind::los;
    int wall_index = -1; // outer wall id for reflections (0: x=0, 1: x=W, 2: y=0, 3: y=L)
    double departure_azimuth = 0.0;
    double length = 0.0;
    std::complex<double> gain;
};

struct ChannelRecord {
    ContextVector context;
    std::vector<Eigen::VectorXcd> clean; // one per AP, length N_s
    std::vector<Eigen::VectorXcd> noisy;
};

struct Dataset {
    std::string scene_hash;
    double noise_variance = 0.0;
    uint64_t seed = 0;
    std::vector<ChannelRecord> records;
};

// LOS plus one image-source specular reflection off each of the four outer
// walls. Path gain = (lambda / (4*pi*d)) * e^{-j*2*pi*d/lambda} * Gamma^(#refl)
// times the penetration factors of every crossed obstacle; paths with
// |gain| < 1e-9 are dropped. Set include_blocker=false to re-synthesize a
// blocker-free environment.
std::vector<Path> enumerate_paths(const SceneConfig& scene, const ContextVector& context,
                                  int ap_index, bool include_blocker = true);

// h = sum_p gain_p * steering(N_s, spacing, azimuth_p); the zero vector when
// every path has been dropped.
Eigen::VectorXcd synth_channel(const SceneConfig& scene, const ContextVector& context,
                               int ap_index, bool include_blocker = true);

// y = h + n with i.i.d. circularly-symmetric complex Gaussian entries of
// per-entry variance sigma2.
Eigen::VectorXcd add_pilot_noise(const Eigen::VectorXcd& h, double sigma2, Rng& rng);

// sigma^2 = mean_s [ rho_s * avg_l ||h_{s,l}||^2 / N_s ] / 10^(snr_db/10).
// Throws std::runtime_error("degenerate dataset") when all channels are zero.
double calibrate_noise(const std::vector<std::vector<Eigen::VectorXcd>>& clean,
                       const SceneConfig& scene, double snr_db);

// Uniform (ue, blocker) draw over the room footprint; UE positions inside the
// blocker footprint, on a partition wall, or within scene.ap_clearance of an
// AP are redrawn.
ContextVector draw_context(const SceneConfig& scene, Rng& rng);

// L i.i.d. context draws, per-AP clean channels, noise calibrated at snr_db
// on the clean set, then noisy observations. Record l derives its position
// and noise streams from (seed, l), so generation order does not matter.
Dataset generate_dataset(const SceneConfig& scene, int64_t num_samples, double snr_db,
                         uint64_t seed);

// CSD1 container (little-endian): magic "CSD1\0\0\0\0", u32 version, u32 S,
// u32 N_s per AP, u64 L, f64 sigma^2, u64 seed, then per record 4 x f64
// context and per AP N_s (re, im) f32 pairs for the clean then the noisy
// channel.
void write_dataset_csd1(const Dataset& ds, const SceneConfig& scene, const std::string& path);

// Reads a CSD1 file. The container does not persist the scene hash; the
// caller attaches the hash of the scene it intends to use.
Dataset read_dataset_csd1(const std::string& path);

} // namespace ctxcsi

#endif
