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

#include "ctxcsi/baselines.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace ctxcsi {

namespace {

constexpr int ctx_dim = 4;
constexpr double var_loading = 1e-6;

Eigen::Vector4d context_vec(const ContextVector& c) {
    return {c.ue_xy.x(), c.ue_xy.y(), c.blocker_xy.x(), c.blocker_xy.y()};
}

// log N(x; mean, diag(var))
double diag_gauss_logpdf(const Eigen::Vector4d& x, const Eigen::Vector4d& mean,
                         const Eigen::Vector4d& var) {
    double lp = -0.5 * ctx_dim * std::log(2.0 * 3.141592653589793);
    for (int d = 0; d < ctx_dim; ++d) {
        const double diff = x[d] - mean[d];
        lp += -0.5 * std::log(var[d]) - 0.5 * diff * diff / var[d];
    }
    return lp;
}

// responsibilities (and data log-likelihood) for a block of contexts
double e_step(const Eigen::MatrixXd& x, const CgmmModel& gmm, Eigen::MatrixXd& resp) {
    const auto n = x.rows();
    const int m = gmm.components();
    double ll = 0.0;
    Eigen::VectorXd lp(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector4d xi = x.row(i).transpose();
        for (int j = 0; j < m; ++j)
            lp[j] = std::log(gmm.weights[j]) +
                    diag_gauss_logpdf(xi, gmm.means.row(j).transpose(), gmm.vars.row(j).transpose());
        const double mx = lp.maxCoeff();
        const double lse = mx + std::log((lp.array() - mx).exp().sum());
        ll += lse;
        resp.row(i) = (lp.array() - lse).exp();
    }
    return ll;
}

Eigen::MatrixXcd psd_clip(const Eigen::MatrixXcd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (c + c.adjoint()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace

CgmmModel cgmm_fit(const Dataset& data, const SceneConfig& scene, int components, uint64_t seed,
                   int iterations, std::vector<double>* ll_trace) {
    const auto n = static_cast<Eigen::Index>(data.records.size());
    if (components < 1)
        throw std::invalid_argument("cgmm_fit: components must be >= 1");
    if (n < 10 * components)
        throw std::invalid_argument("cgmm_fit: need at least 10 samples per component");

    Eigen::MatrixXd x(n, ctx_dim);
    for (Eigen::Index i = 0; i < n; ++i)
        x.row(i) = context_vec(data.records[i].context).transpose();

    const Eigen::Vector4d global_mean = x.colwise().mean().transpose();
    Eigen::Vector4d global_var;
    for (int d = 0; d < ctx_dim; ++d)
        global_var[d] = (x.col(d).array() - global_mean[d]).square().mean() + var_loading;

    Rng rng(Rng::derive(seed, 0xC6130, 0));

    // k-means++ seeding of the component means
    CgmmModel gmm;
    gmm.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
    gmm.means.resize(components, ctx_dim);
    gmm.vars = global_var.transpose().replicate(components, 1);
    gmm.sigma2 = data.noise_variance;

    Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    Eigen::Index first = static_cast<Eigen::Index>(rng.uniform() * n);
    gmm.means.row(0) = x.row(std::min(first, n - 1));
    for (int j = 1; j < components; ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (x.row(i) - gmm.means.row(j - 1)).squaredNorm());
        const double total = d2.sum();
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                u -= d2[i];
                if (u <= 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.uniform() * n);
        }
        gmm.means.row(j) = x.row(pick);
    }

    Eigen::MatrixXd resp(n, components);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < iterations; ++it) {
        const double ll = e_step(x, gmm, resp);
        if (ll_trace)
            ll_trace->push_back(ll);

        // M step with empty-component rescue
        for (int j = 0; j < components; ++j) {
            const double nk = resp.col(j).sum();
            if (nk < 1e-8) {
                const auto pick = static_cast<Eigen::Index>(rng.uniform() * n);
                gmm.means.row(j) = x.row(std::min(pick, n - 1));
                gmm.vars.row(j) = global_var.transpose();
                gmm.weights[j] = 1.0 / static_cast<double>(n);
                std::cerr << "cgmm_fit: reinitialized empty component " << j << " at iteration "
                          << it << "\n";
                continue;
            }
            gmm.weights[j] = nk / static_cast<double>(n);
            Eigen::Vector4d mu = (resp.col(j).transpose() * x).transpose() / nk;
            gmm.means.row(j) = mu.transpose();
            for (int d = 0; d < ctx_dim; ++d) {
                const double v =
                    (resp.col(j).array() * (x.col(d).array() - mu[d]).square()).sum() / nk;
                gmm.vars(j, d) = v + var_loading;
            }
        }
        gmm.weights /= gmm.weights.sum();

        if (it > 0 && std::abs(ll - prev_ll) < 1e-6 * std::abs(prev_ll)) {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }

    // final responsibilities for the channel moments
    e_step(x, gmm, resp);

    const int n_aps = static_cast<int>(scene.aps.size());
    gmm.channel_moments.assign(components, std::vector<Eigen::MatrixXcd>(n_aps));
    for (int s = 0; s < n_aps; ++s) {
        const int ns = scene.aps[s].num_antennas;
        Eigen::MatrixXcd obs(ns, n);
        for (Eigen::Index i = 0; i < n; ++i)
            obs.col(i) = data.records[i].noisy[s];
        for (int j = 0; j < components; ++j) {
            const double nk = resp.col(j).sum();
            Eigen::MatrixXcd moment;
            if (nk > 0.0) {
                Eigen::MatrixXcd weighted = obs;
                for (Eigen::Index i = 0; i < n; ++i)
                    weighted.col(i) *= std::sqrt(resp(i, j));
                moment = (weighted * weighted.adjoint()) / nk;
            } else {
                moment = Eigen::MatrixXcd::Zero(ns, ns);
            }
            moment.diagonal().array() -= gmm.sigma2;
            gmm.channel_moments[j][s] = psd_clip(moment);
        }
    }
    return gmm;
}

std::vector<Eigen::MatrixXcd> cgmm_predict(const CgmmModel& model, const ContextVector& c) {
    const int m = model.components();
    if (m == 0 || model.channel_moments.empty())
        throw std::invalid_argument("cgmm_predict: untrained model");
    const Eigen::Vector4d xc = context_vec(c);
    Eigen::VectorXd lp(m);
    for (int j = 0; j < m; ++j)
        lp[j] = std::log(model.weights[j]) +
                diag_gauss_logpdf(xc, model.means.row(j).transpose(), model.vars.row(j).transpose());
    const double mx = lp.maxCoeff();
    Eigen::VectorXd r = (lp.array() - mx).exp();
    r /= r.sum();

    const size_t n_aps = model.channel_moments.front().size();
    std::vector<Eigen::MatrixXcd> out(n_aps);
    for (size_t s = 0; s < n_aps; ++s) {
        out[s] = Eigen::MatrixXcd::Zero(model.channel_moments.front()[s].rows(),
                                        model.channel_moments.front()[s].cols());
        for (int j = 0; j < m; ++j)
            out[s] += r[j] * model.channel_moments[j][s];
    }
    return out;
}

GeoLosChoice geolos_select(const SceneConfig& scene, const ContextVector& c) {
    const Eigen::Vector3d ue = scene.ue_position(c.ue_xy);

    // blocker-only scene: replicate geometry without the partition walls so
    // segment_attenuation sees just the sensed obstacle
    SceneConfig no_walls = scene;
    no_walls.partition_walls.clear();

    int best_clear = -1, best_any = -1;
    double dist_clear = 0.0, dist_any = 0.0;
    for (int s = 0; s < static_cast<int>(scene.aps.size()); ++s) {
        const double dist = (scene.aps[s].position - ue).norm();
        if (best_any < 0 || dist < dist_any) {
            best_any = s;
            dist_any = dist;
        }
        const double att =
            segment_attenuation(no_walls, scene.aps[s].position, ue, c.blocker_xy);
        if (att == 1.0 && (best_clear < 0 || dist < dist_clear)) {
            best_clear = s;
            dist_clear = dist;
        }
    }
    const int chosen = best_clear >= 0 ? best_clear : best_any;

    GeoLosChoice out;
    out.ap_index = chosen;
    const ApConfig& ap = scene.aps[chosen];
    out.precoder = steering_vector(ap.num_antennas, ap.element_spacing, aod_azimuth(ap, ue));
    return out;
}

} // namespace ctxcsi
