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

#ifndef CTXCSI_EVALSEL_HPP
#define CTXCSI_EVALSEL_HPP

#include "ctxcsi/baselines.hpp"
#include "ctxcsi/chansim.hpp"
#include "ctxcsi/cvae.hpp"
#include "ctxcsi/numerics.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ctxcsi {

// Unit-norm principal eigenvector of the covariance; e_0 for the zero matrix.
Eigen::VectorXcd eigen_precoder(const Eigen::MatrixXcd& c);

// log2(1 + rho * |h^H v|^2 / (sigma2 * ||v||^2)), bits per channel use.
double rate(const Eigen::VectorXcd& h, const Eigen::VectorXcd& v, double rho, double sigma2);

// argmax_s log2(1 + (rho_s / sigma2) * lambda_max(C_s)); ties go to the lower
// index. The spectral overload assembles the covariance without the noise term.
int select_ap(const std::vector<SpectralCovariance>& stats, const std::vector<double>& rho,
              double sigma2);
int select_ap(const std::vector<Eigen::MatrixXcd>& covs, const std::vector<double>& rho,
              double sigma2);

// Monte-Carlo mean of the rate over h ~ CN(0, C) for a fixed precoder.
double expected_rate_mc(const Eigen::MatrixXcd& c, const Eigen::VectorXcd& v, double rho,
                        double sigma2, int draws, Rng& rng);

struct PerfectCsiRef {
    int ap_index = 0;
    double rate = 0.0;
};

// Matched filter v_s = h_s / ||h_s|| per AP on the clean channels; the argmax
// AP and rate are the accuracy ground truth and normalization reference.
PerfectCsiRef perfect_csi_reference(const ChannelRecord& rec, const std::vector<double>& rho,
                                    double sigma2);

// rate(clean h of the chosen AP, v) / perfect-CSI reference rate, in (0, 1].
double normalized_rate(int ap_index, const Eigen::VectorXcd& v, const ChannelRecord& rec,
                       const std::vector<double>& rho, double sigma2);

struct T3Region {
    double x_min = 2.2, x_max = 4.5;
    double y_min = 6.0, y_max = 9.0;
};

struct TestSets {
    Dataset t1, t2, t3;
};

// Builds the three evaluation sets: t1 uniform; t2 rejection-sampled so the
// perfect-CSI optimum flips when the blocker is removed; t3 with the UE in a
// fixed region behind the partition wall and the blocker uniform elsewhere.
// All three share one noise variance: sigma2_override when given (the trained
// system's calibration), otherwise calibrated on t1's clean channels at
// snr_db. Throws when the t2 rejection budget of 1e6 candidates runs out.
TestSets build_testsets(const SceneConfig& scene, int count, double snr_db, uint64_t seed,
                        const T3Region& region = {},
                        std::optional<double> sigma2_override = std::nullopt);

struct MethodResult {
    std::string name;
    std::array<double, 3> accuracy{};                   // per test set
    std::array<std::vector<int>, 3> chosen_ap;          // per test set, per sample
    std::array<std::vector<double>, 3> normalized_rates;
};

struct SelectionReport {
    std::array<std::vector<int>, 3> reference_ap;
    std::array<std::vector<double>, 3> reference_rate;
    std::vector<MethodResult> methods; // cvae-context, cvae-pos, cvae-csi, cgmm, geo-los
};

// Runs every method over the three test sets: per-sample AP choice, precoder
// and normalized rate, plus per-set selection accuracy. The cVAE-csi variant
// reuses the context models with the encoder driven by the record's noisy
// pilots.
SelectionReport evaluate(const std::vector<CvaeModel>& context_models,
                         const std::vector<CvaeModel>& position_models, const CgmmModel& cgmm,
                         const SceneConfig& scene, const TestSets& sets, double sigma2_eval);

struct CcdfRow {
    double threshold = 0.0;
    double fraction = 0.0; // share of samples >= threshold
};

// Sorted unique thresholds with the complementary empirical CDF.
std::vector<CcdfRow> ccdf_export(const std::vector<double>& values);

} // namespace ctxcsi

#endif
