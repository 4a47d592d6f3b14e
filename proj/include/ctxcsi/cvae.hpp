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

#ifndef CTXCSI_CVAE_HPP
#define CTXCSI_CVAE_HPP

#include "ctxcsi/chansim.hpp"
#include "ctxcsi/features.hpp"
#include "ctxcsi/neural.hpp"
#include "ctxcsi/numerics.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ctxcsi {

struct TrainConfig {
    int epochs = 15;
    int batch_size = 128;
    double learning_rate = 1e-3;
    uint64_t seed = 1;
    double kl_warmup_fraction = 0.1;

    void validate() const;
};

struct LatentGaussian {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_variance;

    Eigen::VectorXd variance() const { return log_variance.array().exp(); }
};

// Reference to one persistable array of a model (parameter values or
// batchnorm running statistics).
struct StateRef {
    std::string name;
    std::vector<int> shape;
    AlignedVec* values;
};

// One conditional VAE per access point. The encoder maps a noisy observation
// plus encoded context to a latent Gaussian, the prior maps the context alone,
// and the decoder maps a latent draw plus context to the spectrum of a
// Hermitian Toeplitz covariance. Spectra produced by the decoder live in
// normalized model units (observations scaled by input_scale); the
// predict_stats_* functions convert back to physical units.
class CvaeModel {
  public:
    CvaeModel(int ap_index, int n_antennas, int context_dim, int latent_dim, int base_channels,
              const EncodingConfig& enc, uint64_t init_seed);

    CvaeModel(const CvaeModel&) = delete;
    CvaeModel& operator=(const CvaeModel&) = delete;
    CvaeModel(CvaeModel&&) noexcept;
    CvaeModel& operator=(CvaeModel&&) noexcept;
    ~CvaeModel();

    int ap_index() const { return ap_index_; }
    int n_antennas() const { return n_; }
    int context_dim() const { return context_dim_; }
    int latent_dim() const { return latent_dim_; }
    int base_channels() const { return base_channels_; }
    const EncodingConfig& encoding() const { return encoding_; }

    double sigma2_train = 0.0; // physical per-entry pilot noise variance
    double input_scale = 1.0;  // observation scale applied before encoding

    // context entries consumed by this model: [ue, blocker] or [ue] only
    Eigen::VectorXd raw_context(const ContextVector& c) const;
    Eigen::VectorXd encode(const ContextVector& c) const;

    // eval-mode single-sample forwards (safe for concurrent use on a frozen model)
    LatentGaussian encoder_forward(const Eigen::VectorXcd& y, const Eigen::VectorXd& cbar) const;
    LatentGaussian prior_forward(const Eigen::VectorXd& cbar) const;
    SpectralCovariance decoder_forward(const Eigen::VectorXd& z, const Eigen::VectorXd& cbar) const;

    std::vector<ParamTensor*> trainable_parameters();
    std::vector<StateRef> state_arrays(); // trainables plus batchnorm running stats

    struct Impl;
    Impl& impl() { return *impl_; }
    const Impl& impl() const { return *impl_; }

  private:
    int ap_index_, n_, context_dim_, latent_dim_, base_channels_;
    EncodingConfig encoding_;
    std::unique_ptr<Impl> impl_;
};

// z = mean + exp(log_variance / 2) .* eps
Eigen::VectorXd reparameterize(const LatentGaussian& g, const Eigen::VectorXd& eps);

struct ElboStats {
    double loss = 0.0;   // -loglik + beta * KL, batch mean
    double elbo = 0.0;   // loglik - KL (beta = 1), batch mean
    double loglik = 0.0; // batch mean
    double kl = 0.0;     // batch mean
};

// Batch ELBO with a single reparameterized draw per sample (eps row per
// sample). Runs the networks in train mode and accumulates parameter
// gradients for all three networks: the decoder through the analytic
// spectrum gradient, the encoder through the reparameterized draw and the
// KL term, the prior through the KL term. Requires batch size >= 2.
ElboStats elbo_loss(CvaeModel& model, const std::vector<Eigen::VectorXcd>& y,
                    const std::vector<ContextVector>& ctx, double beta,
                    const Eigen::MatrixXd& eps);

struct TrainResult {
    std::vector<double> elbo_per_epoch; // epoch means at beta = 1
};

// Shuffled mini-batch Adam training on this AP's noisy observations.
// Deterministic per cfg.seed. Throws std::runtime_error on NaN loss.
TrainResult train_cvae(CvaeModel& model, const Dataset& data, const TrainConfig& cfg);

// Context-only inference: decoder at the prior mean (physical units).
SpectralCovariance predict_stats_context(const CvaeModel& model, const ContextVector& c);

// CSI-aware inference: decoder at the encoder mean for a fresh noisy
// observation (physical units).
SpectralCovariance predict_stats_csi(const CvaeModel& model, const Eigen::VectorXcd& y,
                                     const ContextVector& c);

} // namespace ctxcsi

#endif
