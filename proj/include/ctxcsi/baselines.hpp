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

#ifndef CTXCSI_BASELINES_HPP
#define CTXCSI_BASELINES_HPP

#include "ctxcsi/chansim.hpp"
#include "ctxcsi/scene.hpp"

#include <vector>

namespace ctxcsi {

// Gaussian mixture over context vectors with responsibility-weighted channel
// second moments per component and AP.
struct CgmmModel {
    Eigen::VectorXd weights;                                    // M
    Eigen::MatrixXd means;                                      // M x 4
    Eigen::MatrixXd vars;                                       // M x 4, diagonal covariances
    std::vector<std::vector<Eigen::MatrixXcd>> channel_moments; // [M][S], N_s x N_s PSD
    double sigma2 = 0.0; // pilot noise subtracted from the moments

    int components() const { return static_cast<int>(weights.size()); }
};

// EM over the 4-d contexts (k-means++ init, diagonal covariances with 1e-6
// loading, at most `iterations` passes or relative log-likelihood change
// below 1e-6). Channel moments are responsibility-weighted noisy second
// moments minus sigma^2 I, clipped to PSD. Deterministic per seed; empty
// components are reinitialized from a random sample and noted on stderr.
CgmmModel cgmm_fit(const Dataset& data, const SceneConfig& scene, int components, uint64_t seed,
                   int iterations = 100, std::vector<double>* ll_trace = nullptr);

// Posterior-weighted mixture of the per-component channel moments; Hermitian
// PSD by convexity.
std::vector<Eigen::MatrixXcd> cgmm_predict(const CgmmModel& model, const ContextVector& c);

struct GeoLosChoice {
    int ap_index = 0;
    Eigen::VectorXcd precoder;
};

// Nearest AP whose straight path to the UE is not crossed by the blocker
// (nearest overall when all are blocked); steers along the LOS departure
// azimuth. Deliberately unaware of partition walls: the heuristic knows the
// sensed obstacle but not the static environment geometry.
GeoLosChoice geolos_select(const SceneConfig& scene, const ContextVector& c);

} // namespace ctxcsi

#endif
