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

#include "ctxcsi/evalsel.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ctxcsi {

Eigen::VectorXcd eigen_precoder(const Eigen::MatrixXcd& c) {
    EigPair top = top_eigpair(c);
    const double nrm = top.vector.norm();
    return nrm > 0.0 ? Eigen::VectorXcd(top.vector / nrm) : top.vector;
}

double rate(const Eigen::VectorXcd& h, const Eigen::VectorXcd& v, double rho, double sigma2) {
    if (v.squaredNorm() == 0.0)
        throw std::invalid_argument("rate: zero precoder");
    if (!(sigma2 > 0.0))
        throw std::invalid_argument("rate: sigma2 must be > 0");
    const double gain = std::norm(v.dot(h)); // |h^H v|^2
    return std::log2(1.0 + rho * gain / (sigma2 * v.squaredNorm()));
}

namespace {

int argmax_objective(const std::vector<double>& lambda_max, const std::vector<double>& rho,
                     double sigma2) {
    if (lambda_max.empty())
        throw std::invalid_argument("select_ap: empty statistic list");
    if (rho.size() != lambda_max.size())
        throw std::invalid_argument("select_ap: rho list size mismatch");
    int best = 0;
    double best_obj = -1.0;
    for (size_t s = 0; s < lambda_max.size(); ++s) {
        const double obj = std::log2(1.0 + rho[s] / sigma2 * std::max(lambda_max[s], 0.0));
        if (obj > best_obj) { // strict: ties stay at the lower index
            best_obj = obj;
            best = static_cast<int>(s);
        }
    }
    return best;
}

} // namespace

int select_ap(const std::vector<SpectralCovariance>& stats, const std::vector<double>& rho,
              double sigma2) {
    std::vector<double> lams(stats.size());
    for (size_t s = 0; s < stats.size(); ++s)
        lams[s] = top_eigpair(toeplitz_cov(stats[s], false)).value;
    return argmax_objective(lams, rho, sigma2);
}

int select_ap(const std::vector<Eigen::MatrixXcd>& covs, const std::vector<double>& rho,
              double sigma2) {
    std::vector<double> lams(covs.size());
    for (size_t s = 0; s < covs.size(); ++s)
        lams[s] = top_eigpair(covs[s]).value;
    return argmax_objective(lams, rho, sigma2);
}

double expected_rate_mc(const Eigen::MatrixXcd& c, const Eigen::VectorXcd& v, double rho,
                        double sigma2, int draws, Rng& rng) {
    if (draws < 1)
        throw std::invalid_argument("expected_rate_mc: draws must be >= 1");
    const int n = static_cast<int>(c.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (c + c.adjoint()));
    const Eigen::MatrixXcd factor =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    double acc = 0.0;
    Eigen::VectorXcd g(n);
    for (int d = 0; d < draws; ++d) {
        for (int i = 0; i < n; ++i)
            g[i] = rng.cnormal();
        acc += rate(factor * g, v, rho, sigma2);
    }
    return acc / draws;
}

PerfectCsiRef perfect_csi_reference(const ChannelRecord& rec, const std::vector<double>& rho,
                                    double sigma2) {
    if (rec.clean.empty())
        throw std::invalid_argument("perfect_csi_reference: no clean channels");
    if (rho.size() != rec.clean.size())
        throw std::invalid_argument("perfect_csi_reference: rho list size mismatch");
    PerfectCsiRef ref;
    double best = -1.0;
    bool any = false;
    for (size_t s = 0; s < rec.clean.size(); ++s) {
        if (rec.clean[s].squaredNorm() == 0.0)
            continue;
        any = true;
        // matched filter v = h; evaluating through rate() makes a method that
        // reproduces this choice normalize to exactly 1.0
        const double r = rate(rec.clean[s], rec.clean[s], rho[s], sigma2);
        if (r > best) {
            best = r;
            ref.ap_index = static_cast<int>(s);
            ref.rate = r;
        }
    }
    if (!any)
        throw std::runtime_error("perfect_csi_reference: all channels zero");
    return ref;
}

double normalized_rate(int ap_index, const Eigen::VectorXcd& v, const ChannelRecord& rec,
                       const std::vector<double>& rho, double sigma2) {
    const PerfectCsiRef ref = perfect_csi_reference(rec, rho, sigma2);
    return rate(rec.clean[ap_index], v, rho[ap_index], sigma2) / ref.rate;
}

// ------------------------------------------------------------- test sets ---

namespace {

std::vector<double> tx_powers(const SceneConfig& scene) {
    std::vector<double> rho(scene.aps.size());
    for (size_t s = 0; s < scene.aps.size(); ++s)
        rho[s] = scene.aps[s].tx_power;
    return rho;
}

void synth_all(const SceneConfig& scene, ChannelRecord& rec) {
    const size_t n_aps = scene.aps.size();
    rec.clean.resize(n_aps);
    for (size_t s = 0; s < n_aps; ++s)
        rec.clean[s] = synth_channel(scene, rec.context, static_cast<int>(s));
}

// MRT argmax is independent of sigma2, so the t2 flip test needs no noise level.
int mrt_argmax(const std::vector<Eigen::VectorXcd>& clean, const std::vector<double>& rho) {
    int best = 0;
    double best_p = -1.0;
    for (size_t s = 0; s < clean.size(); ++s) {
        const double p = rho[s] * clean[s].squaredNorm();
        if (p > best_p) {
            best_p = p;
            best = static_cast<int>(s);
        }
    }
    return best;
}

void add_noise_pass(Dataset& ds, const SceneConfig& scene, double sigma2, uint64_t seed) {
    ds.noise_variance = sigma2;
    for (size_t l = 0; l < ds.records.size(); ++l) {
        Rng rng(Rng::derive(seed, static_cast<uint64_t>(l), 1));
        auto& rec = ds.records[l];
        rec.noisy.resize(rec.clean.size());
        for (size_t s = 0; s < rec.clean.size(); ++s)
            rec.noisy[s] = add_pilot_noise(rec.clean[s], sigma2, rng);
    }
    (void)scene;
}

} // namespace

TestSets build_testsets(const SceneConfig& scene, int count, double snr_db, uint64_t seed,
                        const T3Region& region, std::optional<double> sigma2_override) {
    if (count < 1)
        throw std::invalid_argument("build_testsets: count must be >= 1");
    scene.validate();
    if (!(region.x_min < region.x_max) || !(region.y_min < region.y_max))
        throw std::invalid_argument("build_testsets: malformed t3 region");

    const std::vector<double> rho = tx_powers(scene);
    TestSets sets;
    const uint64_t seed1 = Rng::derive(seed, 1);
    const uint64_t seed2 = Rng::derive(seed, 2);
    const uint64_t seed3 = Rng::derive(seed, 3);

    // t1: the training distribution, fresh seed
    sets.t1.scene_hash = scene.hash();
    sets.t1.seed = seed1;
    sets.t1.records.resize(count);
    for (int l = 0; l < count; ++l) {
        Rng rng(Rng::derive(seed1, static_cast<uint64_t>(l), 0));
        sets.t1.records[l].context = draw_context(scene, rng);
        synth_all(scene, sets.t1.records[l]);
    }

    // t2: the blocker decides the optimal AP
    sets.t2.scene_hash = scene.hash();
    sets.t2.seed = seed2;
    sets.t2.records.reserve(count);
    {
        constexpr int64_t budget = 1000000;
        int64_t candidate = 0;
        std::vector<Eigen::VectorXcd> unblocked(scene.aps.size());
        while (static_cast<int>(sets.t2.records.size()) < count) {
            if (candidate >= budget) {
                std::ostringstream msg;
                msg << "build_testsets: t2 rejection budget exhausted (" << sets.t2.records.size()
                    << "/" << count << " accepted, acceptance rate "
                    << static_cast<double>(sets.t2.records.size()) / candidate << ")";
                throw std::runtime_error(msg.str());
            }
            Rng rng(Rng::derive(seed2, static_cast<uint64_t>(candidate), 0));
            ++candidate;
            ChannelRecord rec;
            rec.context = draw_context(scene, rng);
            synth_all(scene, rec);
            for (size_t s = 0; s < scene.aps.size(); ++s)
                unblocked[s] = synth_channel(scene, rec.context, static_cast<int>(s), false);
            if (mrt_argmax(rec.clean, rho) != mrt_argmax(unblocked, rho))
                sets.t2.records.push_back(std::move(rec));
        }
    }

    // t3: UE behind the partition wall, blocker uniform outside that region
    sets.t3.scene_hash = scene.hash();
    sets.t3.seed = seed3;
    sets.t3.records.resize(count);
    for (int l = 0; l < count; ++l) {
        Rng rng(Rng::derive(seed3, static_cast<uint64_t>(l), 0));
        ContextVector ctx;
        const double half = 0.5 * scene.blocker_footprint_side;
        for (;;) {
            ctx.ue_xy = {rng.uniform(region.x_min, region.x_max),
                         rng.uniform(region.y_min, region.y_max)};
            for (;;) {
                ctx.blocker_xy = {rng.uniform(0.0, scene.room_size.x()),
                                  rng.uniform(0.0, scene.room_size.y())};
                const bool in_region =
                    ctx.blocker_xy.x() >= region.x_min && ctx.blocker_xy.x() <= region.x_max &&
                    ctx.blocker_xy.y() >= region.y_min && ctx.blocker_xy.y() <= region.y_max;
                if (!in_region)
                    break;
            }
            const bool ue_in_blocker =
                std::abs(ctx.ue_xy.x() - ctx.blocker_xy.x()) < half &&
                std::abs(ctx.ue_xy.y() - ctx.blocker_xy.y()) < half;
            if (!ue_in_blocker)
                break;
        }
        sets.t3.records[l].context = ctx;
        synth_all(scene, sets.t3.records[l]);
    }

    // one shared noise level: the trained system's calibration when supplied
    double sigma2;
    if (sigma2_override) {
        sigma2 = *sigma2_override;
        if (!(sigma2 > 0.0))
            throw std::invalid_argument("build_testsets: sigma2_override must be > 0");
    } else {
        std::vector<std::vector<Eigen::VectorXcd>> clean(sets.t1.records.size());
        for (size_t l = 0; l < sets.t1.records.size(); ++l)
            clean[l] = sets.t1.records[l].clean;
        sigma2 = calibrate_noise(clean, scene, snr_db);
    }
    add_noise_pass(sets.t1, scene, sigma2, seed1);
    add_noise_pass(sets.t2, scene, sigma2, seed2);
    add_noise_pass(sets.t3, scene, sigma2, seed3);
    return sets;
}

// ------------------------------------------------------------- evaluation ---

namespace {

struct Choice {
    int ap = 0;
    Eigen::VectorXcd precoder;
};

Choice choose_from_covs(const std::vector<Eigen::MatrixXcd>& covs, const std::vector<double>& rho,
                        double sigma2) {
    Choice ch;
    ch.ap = select_ap(covs, rho, sigma2);
    ch.precoder = eigen_precoder(covs[ch.ap]);
    return ch;
}

} // namespace

SelectionReport evaluate(const std::vector<CvaeModel>& context_models,
                         const std::vector<CvaeModel>& position_models, const CgmmModel& cgmm,
                         const SceneConfig& scene, const TestSets& sets, double sigma2_eval) {
    const size_t n_aps = scene.aps.size();
    if (context_models.size() != n_aps)
        throw std::invalid_argument("evaluate: missing model for method cvae-context");
    if (position_models.size() != n_aps)
        throw std::invalid_argument("evaluate: missing model for method cvae-pos");
    if (cgmm.channel_moments.empty())
        throw std::invalid_argument("evaluate: missing model for method cgmm");
    if (!(sigma2_eval > 0.0))
        throw std::invalid_argument("evaluate: sigma2_eval must be > 0");

    const std::vector<double> rho = tx_powers(scene);
    const std::array<const Dataset*, 3> all = {&sets.t1, &sets.t2, &sets.t3};

    SelectionReport report;
    report.methods.resize(5);
    report.methods[0].name = "cvae-context";
    report.methods[1].name = "cvae-pos";
    report.methods[2].name = "cvae-csi";
    report.methods[3].name = "cgmm";
    report.methods[4].name = "geo-los";

    for (int set = 0; set < 3; ++set) {
        const Dataset& ds = *all[set];
        const size_t n = ds.records.size();
        report.reference_ap[set].resize(n);
        report.reference_rate[set].resize(n);
        for (auto& m : report.methods) {
            m.chosen_ap[set].resize(n);
            m.normalized_rates[set].resize(n);
        }

        std::array<int64_t, 5> hits{};
        std::vector<Eigen::MatrixXcd> covs(n_aps);
        for (size_t l = 0; l < n; ++l) {
            const ChannelRecord& rec = ds.records[l];
            const PerfectCsiRef ref = perfect_csi_reference(rec, rho, sigma2_eval);
            report.reference_ap[set][l] = ref.ap_index;
            report.reference_rate[set][l] = ref.rate;

            auto score = [&](int method, const Choice& ch) {
                report.methods[method].chosen_ap[set][l] = ch.ap;
                report.methods[method].normalized_rates[set][l] =
                    rate(rec.clean[ch.ap], ch.precoder, rho[ch.ap], sigma2_eval) / ref.rate;
                if (ch.ap == ref.ap_index)
                    hits[method] += 1;
            };

            for (size_t s = 0; s < n_aps; ++s)
                covs[s] = toeplitz_cov(predict_stats_context(context_models[s], rec.context), false);
            score(0, choose_from_covs(covs, rho, sigma2_eval));

            for (size_t s = 0; s < n_aps; ++s)
                covs[s] =
                    toeplitz_cov(predict_stats_context(position_models[s], rec.context), false);
            score(1, choose_from_covs(covs, rho, sigma2_eval));

            for (size_t s = 0; s < n_aps; ++s)
                covs[s] = toeplitz_cov(
                    predict_stats_csi(context_models[s], rec.noisy[s], rec.context), false);
            score(2, choose_from_covs(covs, rho, sigma2_eval));

            score(3, choose_from_covs(cgmm_predict(cgmm, rec.context), rho, sigma2_eval));

            const GeoLosChoice geo = geolos_select(scene, rec.context);
            score(4, Choice{geo.ap_index, geo.precoder});
        }

        for (int mth = 0; mth < 5; ++mth)
            report.methods[mth].accuracy[set] =
                n > 0 ? static_cast<double>(hits[mth]) / static_cast<double>(n) : 0.0;
    }
    return report;
}

std::vector<CcdfRow> ccdf_export(const std::vector<double>& values) {
    if (values.empty())
        throw std::invalid_argument("ccdf_export: empty value list");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());

    std::vector<CcdfRow> rows;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i])
            ++j;
        // everything at or after position i is >= sorted[i]
        rows.push_back({sorted[i], static_cast<double>(sorted.size() - i) / n});
        i = j;
    }
    return rows;
}

} // namespace ctxcsi
