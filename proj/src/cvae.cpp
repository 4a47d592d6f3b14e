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

#include "ctxcsi/cvae.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ctxcsi {

namespace {

constexpr double logvar_clamp = 10.0;

int conv_down(int l) { return (l + 2 * 3 - 7) / 2 + 1; } // k=7, s=2, p=3

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1)
        throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 2)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (kl_warmup_fraction < 0.0 || kl_warmup_fraction > 1.0)
        throw std::invalid_argument("TrainConfig: kl_warmup_fraction must be in [0, 1]");
}

// ----------------------------------------------------------------- wiring ---

struct CvaeModel::Impl {
    Rng init_rng; // declared first: later members consume it in declaration order

    int n, nc, nl, ctx_feat;
    int l1, l2, l3;

    // encoder
    Conv1d e_in1, e_in2, e_conv1, e_conv2, e_conv3;
    BatchNorm e_bn1, e_bn2, e_bn3;
    Dense e_out;
    // decoder
    Dense d_in;
    Conv1d d_conv1, d_conv2, d_conv3;
    BatchNorm d_bn1, d_bn2, d_bn3;
    Dense d_out;
    ExpClamp head;
    // prior
    Dense p_fc1;
    BatchNorm p_bn;
    Dense p_fc2;

    Relu relu;
    UpsampleNearest2 up;

    Impl(int n_, int ctx_feat_, int nl_, int nc_, uint64_t seed)
        : init_rng(seed), n(n_), nc(nc_), nl(nl_), ctx_feat(ctx_feat_), l1(conv_down(n_)),
          l2(conv_down(l1)), l3(conv_down(l2)),
          e_in1("enc.in1", 2, nc_, 1, 1, 0, init_rng),
          e_in2("enc.in2", nc_ + ctx_feat_, nc_, 1, 1, 0, init_rng),
          e_conv1("enc.conv1", nc_, 2 * nc_, 7, 2, 3, init_rng),
          e_conv2("enc.conv2", 2 * nc_, 4 * nc_, 7, 2, 3, init_rng),
          e_conv3("enc.conv3", 4 * nc_, 8 * nc_, 7, 2, 3, init_rng),
          e_bn1("enc.bn1", 2 * nc_), e_bn2("enc.bn2", 4 * nc_), e_bn3("enc.bn3", 8 * nc_),
          e_out("enc.out", 8 * nc_ * l3, 2 * nl_, init_rng),
          d_in("dec.in", nl_ + ctx_feat_, 8 * nc_ * l3, init_rng),
          d_conv1("dec.conv1", 8 * nc_, 4 * nc_, 7, 1, 3, init_rng),
          d_conv2("dec.conv2", 4 * nc_, 2 * nc_, 7, 1, 3, init_rng),
          d_conv3("dec.conv3", 2 * nc_, nc_, 7, 1, 3, init_rng),
          d_bn1("dec.bn1", 4 * nc_), d_bn2("dec.bn2", 2 * nc_), d_bn3("dec.bn3", nc_),
          d_out("dec.out", nc_ * 8 * l3, 2 * n_, init_rng),
          p_fc1("prior.fc1", ctx_feat_, 8 * nl_, init_rng),
          p_bn("prior.bn", 8 * nl_),
          p_fc2("prior.fc2", 8 * nl_, 2 * nl_, init_rng) {}

    struct EncWs {
        Conv1d::Cache in1c, in2c, c1c, c2c, c3c;
        BatchNorm::Cache b1c, b2c, b3c;
        Relu::Cache r1c, r2c, r3c;
        Dense::Cache outc;
    };
    struct DecWs {
        Dense::Cache inc, outc;
        UpsampleNearest2::Cache u1c, u2c, u3c;
        Conv1d::Cache c1c, c2c, c3c;
        BatchNorm::Cache b1c, b2c, b3c;
        Relu::Cache r1c, r2c, r3c;
        ExpClamp::Cache headc;
    };
    struct PriWs {
        Dense::Cache f1c, f2c;
        BatchNorm::Cache bnc;
        Relu::Cache rc;
    };

    static Tensor inject_context(const Tensor& x, const Eigen::MatrixXd& cbar) {
        const int batch = x.shape[0], ch = x.shape[1], len = x.shape[2];
        const int d = static_cast<int>(cbar.cols());
        Tensor out = Tensor::zeros({batch, ch + d, len});
        for (int b = 0; b < batch; ++b) {
            const double* src = x.v.data() + static_cast<size_t>(b) * ch * len;
            double* dst = out.v.data() + static_cast<size_t>(b) * (ch + d) * len;
            std::copy(src, src + static_cast<size_t>(ch) * len, dst);
            for (int j = 0; j < d; ++j) {
                const double val = cbar(b, j);
                double* row = dst + static_cast<size_t>(ch + j) * len;
                std::fill(row, row + len, val);
            }
        }
        return out;
    }

    static Tensor slice_channels(const Tensor& d, int keep) {
        const int batch = d.shape[0], ch = d.shape[1], len = d.shape[2];
        Tensor out = Tensor::zeros({batch, keep, len});
        for (int b = 0; b < batch; ++b)
            std::copy(d.v.data() + static_cast<size_t>(b) * ch * len,
                      d.v.data() + static_cast<size_t>(b) * ch * len +
                          static_cast<size_t>(keep) * len,
                      out.v.data() + static_cast<size_t>(b) * keep * len);
        return out;
    }

    // ---- encoder ----
    Tensor enc_train(const Tensor& y2, const Eigen::MatrixXd& cbar, EncWs& ws) {
        const int batch = y2.shape[0];
        Tensor t = e_in1.forward(y2, &ws.in1c);
        t = inject_context(t, cbar);
        t = e_in2.forward(t, &ws.in2c);
        t = e_conv1.forward(t, &ws.c1c);
        t = e_bn1.forward_train(t, ws.b1c);
        t = relu.forward(t, &ws.r1c);
        t = e_conv2.forward(t, &ws.c2c);
        t = e_bn2.forward_train(t, ws.b2c);
        t = relu.forward(t, &ws.r2c);
        t = e_conv3.forward(t, &ws.c3c);
        t = e_bn3.forward_train(t, ws.b3c);
        t = relu.forward(t, &ws.r3c);
        t.shape = {batch, 8 * nc * l3};
        return e_out.forward(t, &ws.outc);
    }

    void enc_backward(const Tensor& dout, EncWs& ws) {
        const int batch = dout.shape[0];
        Tensor d = e_out.backward(dout, ws.outc);
        d.shape = {batch, 8 * nc, l3};
        d = relu.backward(d, ws.r3c);
        d = e_bn3.backward(d, ws.b3c);
        d = e_conv3.backward(d, ws.c3c);
        d = relu.backward(d, ws.r2c);
        d = e_bn2.backward(d, ws.b2c);
        d = e_conv2.backward(d, ws.c2c);
        d = relu.backward(d, ws.r1c);
        d = e_bn1.backward(d, ws.b1c);
        d = e_conv1.backward(d, ws.c1c);
        d = e_in2.backward(d, ws.in2c);
        d = slice_channels(d, nc);
        e_in1.backward(d, ws.in1c); // input gradient unused
    }

    Tensor enc_eval(const Tensor& y2, const Eigen::MatrixXd& cbar) const {
        const int batch = y2.shape[0];
        Tensor t = e_in1.forward(y2);
        t = inject_context(t, cbar);
        t = e_in2.forward(t);
        t = e_conv1.forward(t);
        t = e_bn1.forward_eval(t);
        t = relu.forward(t);
        t = e_conv2.forward(t);
        t = e_bn2.forward_eval(t);
        t = relu.forward(t);
        t = e_conv3.forward(t);
        t = e_bn3.forward_eval(t);
        t = relu.forward(t);
        t.shape = {batch, 8 * nc * l3};
        return e_out.forward(t);
    }

    // ---- decoder ----
    Tensor dec_train(const Eigen::MatrixXd& z, const Eigen::MatrixXd& cbar, DecWs& ws) {
        const int batch = static_cast<int>(z.rows());
        Tensor x = Tensor::zeros({batch, nl + ctx_feat});
        for (int b = 0; b < batch; ++b) {
            for (int j = 0; j < nl; ++j)
                x.v[static_cast<size_t>(b) * (nl + ctx_feat) + j] = z(b, j);
            for (int j = 0; j < ctx_feat; ++j)
                x.v[static_cast<size_t>(b) * (nl + ctx_feat) + nl + j] = cbar(b, j);
        }
        Tensor t = d_in.forward(x, &ws.inc);
        t.shape = {batch, 8 * nc, l3};
        t = up.forward(t, &ws.u1c);
        t = d_conv1.forward(t, &ws.c1c);
        t = d_bn1.forward_train(t, ws.b1c);
        t = relu.forward(t, &ws.r1c);
        t = up.forward(t, &ws.u2c);
        t = d_conv2.forward(t, &ws.c2c);
        t = d_bn2.forward_train(t, ws.b2c);
        t = relu.forward(t, &ws.r2c);
        t = up.forward(t, &ws.u3c);
        t = d_conv3.forward(t, &ws.c3c);
        t = d_bn3.forward_train(t, ws.b3c);
        t = relu.forward(t, &ws.r3c);
        t.shape = {batch, nc * 8 * l3};
        t = d_out.forward(t, &ws.outc);
        return head.forward(t, &ws.headc);
    }

    // returns d loss / d z
    Eigen::MatrixXd dec_backward(const Tensor& dspec, DecWs& ws) {
        const int batch = dspec.shape[0];
        Tensor d = head.backward(dspec, ws.headc);
        d = d_out.backward(d, ws.outc);
        d.shape = {batch, nc, 8 * l3};
        d = relu.backward(d, ws.r3c);
        d = d_bn3.backward(d, ws.b3c);
        d = d_conv3.backward(d, ws.c3c);
        d = up.backward(d, ws.u3c);
        d = relu.backward(d, ws.r2c);
        d = d_bn2.backward(d, ws.b2c);
        d = d_conv2.backward(d, ws.c2c);
        d = up.backward(d, ws.u2c);
        d = relu.backward(d, ws.r1c);
        d = d_bn1.backward(d, ws.b1c);
        d = d_conv1.backward(d, ws.c1c);
        d = up.backward(d, ws.u1c);
        d.shape = {batch, 8 * nc * l3};
        d = d_in.backward(d, ws.inc);
        Eigen::MatrixXd dz(batch, nl);
        for (int b = 0; b < batch; ++b)
            for (int j = 0; j < nl; ++j)
                dz(b, j) = d.v[static_cast<size_t>(b) * (nl + ctx_feat) + j];
        return dz;
    }

    Tensor dec_eval(const Eigen::MatrixXd& z, const Eigen::MatrixXd& cbar) const {
        const int batch = static_cast<int>(z.rows());
        Tensor x = Tensor::zeros({batch, nl + ctx_feat});
        for (int b = 0; b < batch; ++b) {
            for (int j = 0; j < nl; ++j)
                x.v[static_cast<size_t>(b) * (nl + ctx_feat) + j] = z(b, j);
            for (int j = 0; j < ctx_feat; ++j)
                x.v[static_cast<size_t>(b) * (nl + ctx_feat) + nl + j] = cbar(b, j);
        }
        Tensor t = d_in.forward(x);
        t.shape = {batch, 8 * nc, l3};
        t = up.forward(t);
        t = d_conv1.forward(t);
        t = d_bn1.forward_eval(t);
        t = relu.forward(t);
        t = up.forward(t);
        t = d_conv2.forward(t);
        t = d_bn2.forward_eval(t);
        t = relu.forward(t);
        t = up.forward(t);
        t = d_conv3.forward(t);
        t = d_bn3.forward_eval(t);
        t = relu.forward(t);
        t.shape = {batch, nc * 8 * l3};
        t = d_out.forward(t);
        return head.forward(t);
    }

    // ---- prior ----
    Tensor pri_train(const Eigen::MatrixXd& cbar, PriWs& ws) {
        const int batch = static_cast<int>(cbar.rows());
        Tensor x = Tensor::zeros({batch, ctx_feat});
        for (int b = 0; b < batch; ++b)
            for (int j = 0; j < ctx_feat; ++j)
                x.v[static_cast<size_t>(b) * ctx_feat + j] = cbar(b, j);
        Tensor t = p_fc1.forward(x, &ws.f1c);
        t = p_bn.forward_train(t, ws.bnc);
        t = relu.forward(t, &ws.rc);
        return p_fc2.forward(t, &ws.f2c);
    }

    void pri_backward(const Tensor& dout, PriWs& ws) {
        Tensor d = p_fc2.backward(dout, ws.f2c);
        d = relu.backward(d, ws.rc);
        d = p_bn.backward(d, ws.bnc);
        p_fc1.backward(d, ws.f1c);
    }

    Tensor pri_eval(const Eigen::MatrixXd& cbar) const {
        const int batch = static_cast<int>(cbar.rows());
        Tensor x = Tensor::zeros({batch, ctx_feat});
        for (int b = 0; b < batch; ++b)
            for (int j = 0; j < ctx_feat; ++j)
                x.v[static_cast<size_t>(b) * ctx_feat + j] = cbar(b, j);
        Tensor t = p_fc1.forward(x);
        t = p_bn.forward_eval(t);
        t = relu.forward(t);
        return p_fc2.forward(t);
    }
};

namespace {

struct HeadSplit {
    Eigen::MatrixXd mu, lv;
    Eigen::ArrayXXd mask; // 1 where the raw log-variance is inside the clamp
};

HeadSplit split_latent_head(const Tensor& out, int nl) {
    const int batch = out.shape[0];
    HeadSplit h;
    h.mu.resize(batch, nl);
    h.lv.resize(batch, nl);
    h.mask.resize(batch, nl);
    for (int b = 0; b < batch; ++b)
        for (int j = 0; j < nl; ++j) {
            h.mu(b, j) = out.v[static_cast<size_t>(b) * 2 * nl + j];
            const double raw = out.v[static_cast<size_t>(b) * 2 * nl + nl + j];
            h.lv(b, j) = std::clamp(raw, -logvar_clamp, logvar_clamp);
            h.mask(b, j) = (raw > -logvar_clamp && raw < logvar_clamp) ? 1.0 : 0.0;
        }
    return h;
}

Tensor pack_latent_grad(const Eigen::MatrixXd& dmu, const Eigen::MatrixXd& dlv) {
    const int batch = static_cast<int>(dmu.rows());
    const int nl = static_cast<int>(dmu.cols());
    Tensor t = Tensor::zeros({batch, 2 * nl});
    for (int b = 0; b < batch; ++b)
        for (int j = 0; j < nl; ++j) {
            t.v[static_cast<size_t>(b) * 2 * nl + j] = dmu(b, j);
            t.v[static_cast<size_t>(b) * 2 * nl + nl + j] = dlv(b, j);
        }
    return t;
}

LatentGaussian to_latent(const Tensor& out, int nl) {
    HeadSplit h = split_latent_head(out, nl);
    LatentGaussian g;
    g.mean = h.mu.row(0).transpose();
    g.log_variance = h.lv.row(0).transpose();
    return g;
}

} // namespace

CvaeModel::CvaeModel(CvaeModel&&) noexcept = default;
CvaeModel& CvaeModel::operator=(CvaeModel&&) noexcept = default;
CvaeModel::~CvaeModel() = default;

CvaeModel::CvaeModel(int ap_index, int n_antennas, int context_dim, int latent_dim,
                     int base_channels, const EncodingConfig& enc, uint64_t init_seed)
    : ap_index_(ap_index), n_(n_antennas), context_dim_(context_dim), latent_dim_(latent_dim),
      base_channels_(base_channels), encoding_(enc) {
    if (n_antennas < 1 || latent_dim < 1 || base_channels < 1)
        throw std::invalid_argument("CvaeModel: bad architecture sizes");
    if (context_dim != 2 && context_dim != 4)
        throw std::invalid_argument("CvaeModel: context_dim must be 2 or 4");
    encoding_.validate();
    impl_ = std::make_unique<Impl>(n_antennas, context_dim * 2 * enc.k, latent_dim, base_channels,
                                   init_seed);
}

Eigen::VectorXd CvaeModel::raw_context(const ContextVector& c) const {
    Eigen::VectorXd raw(context_dim_);
    raw[0] = c.ue_xy.x();
    raw[1] = c.ue_xy.y();
    if (context_dim_ == 4) {
        raw[2] = c.blocker_xy.x();
        raw[3] = c.blocker_xy.y();
    }
    return raw;
}

Eigen::VectorXd CvaeModel::encode(const ContextVector& c) const {
    return encode_context(raw_context(c), encoding_);
}

LatentGaussian CvaeModel::encoder_forward(const Eigen::VectorXcd& y,
                                          const Eigen::VectorXd& cbar) const {
    if (y.size() != n_)
        throw std::invalid_argument("encoder_forward: observation length mismatch");
    if (cbar.size() != impl_->ctx_feat)
        throw std::invalid_argument("encoder_forward: context feature length mismatch");
    Tensor y2 = Tensor::zeros({1, 2, n_});
    for (int i = 0; i < n_; ++i) {
        y2.v[i] = input_scale * y[i].real();
        y2.v[n_ + i] = input_scale * y[i].imag();
    }
    Eigen::MatrixXd cb = cbar.transpose();
    return to_latent(impl_->enc_eval(y2, cb), latent_dim_);
}

LatentGaussian CvaeModel::prior_forward(const Eigen::VectorXd& cbar) const {
    if (cbar.size() != impl_->ctx_feat)
        throw std::invalid_argument("prior_forward: context feature length mismatch");
    Eigen::MatrixXd cb = cbar.transpose();
    return to_latent(impl_->pri_eval(cb), latent_dim_);
}

SpectralCovariance CvaeModel::decoder_forward(const Eigen::VectorXd& z,
                                              const Eigen::VectorXd& cbar) const {
    if (z.size() != latent_dim_)
        throw std::invalid_argument("decoder_forward: latent length mismatch");
    if (cbar.size() != impl_->ctx_feat)
        throw std::invalid_argument("decoder_forward: context feature length mismatch");
    Eigen::MatrixXd zm = z.transpose();
    Eigen::MatrixXd cb = cbar.transpose();
    Tensor spec = impl_->dec_eval(zm, cb);
    SpectralCovariance sc;
    sc.spectrum = Eigen::Map<const Eigen::VectorXd>(spec.v.data(), 2 * n_);
    sc.noise_variance = sigma2_train * input_scale * input_scale;
    return sc;
}

std::vector<ParamTensor*> CvaeModel::trainable_parameters() {
    Impl& m = *impl_;
    return {
        &m.e_in1.w,   &m.e_in1.b,   &m.e_in2.w,   &m.e_in2.b,   &m.e_conv1.w, &m.e_conv1.b,
        &m.e_bn1.gamma, &m.e_bn1.beta, &m.e_conv2.w, &m.e_conv2.b, &m.e_bn2.gamma, &m.e_bn2.beta,
        &m.e_conv3.w, &m.e_conv3.b, &m.e_bn3.gamma, &m.e_bn3.beta, &m.e_out.w,   &m.e_out.b,
        &m.d_in.w,    &m.d_in.b,    &m.d_conv1.w, &m.d_conv1.b, &m.d_bn1.gamma, &m.d_bn1.beta,
        &m.d_conv2.w, &m.d_conv2.b, &m.d_bn2.gamma, &m.d_bn2.beta, &m.d_conv3.w, &m.d_conv3.b,
        &m.d_bn3.gamma, &m.d_bn3.beta, &m.d_out.w,   &m.d_out.b,   &m.p_fc1.w,   &m.p_fc1.b,
        &m.p_bn.gamma, &m.p_bn.beta, &m.p_fc2.w,   &m.p_fc2.b};
}

std::vector<StateRef> CvaeModel::state_arrays() {
    std::vector<StateRef> out;
    for (ParamTensor* p : trainable_parameters())
        out.push_back({p->name, p->shape, &p->value});
    Impl& m = *impl_;
    for (BatchNorm* bn : {&m.e_bn1, &m.e_bn2, &m.e_bn3, &m.d_bn1, &m.d_bn2, &m.d_bn3, &m.p_bn}) {
        const std::string base = bn->gamma.name.substr(0, bn->gamma.name.size() - 6); // strip ".gamma"
        out.push_back({base + ".running_mean", {bn->features()}, &bn->running_mean});
        out.push_back({base + ".running_var", {bn->features()}, &bn->running_var});
    }
    return out;
}

Eigen::VectorXd reparameterize(const LatentGaussian& g, const Eigen::VectorXd& eps) {
    if (eps.size() != g.mean.size())
        throw std::invalid_argument("reparameterize: size mismatch");
    return g.mean.array() + (0.5 * g.log_variance).array().exp() * eps.array();
}

ElboStats elbo_loss(CvaeModel& model, const std::vector<Eigen::VectorXcd>& y,
                    const std::vector<ContextVector>& ctx, double beta,
                    const Eigen::MatrixXd& eps) {
    CvaeModel::Impl& m = model.impl();
    const int batch = static_cast<int>(y.size());
    const int n = m.n;
    const int nl = m.nl;
    if (batch < 2)
        throw std::invalid_argument("elbo_loss: batch of at least 2 required");
    if (static_cast<int>(ctx.size()) != batch || eps.rows() != batch || eps.cols() != nl)
        throw std::invalid_argument("elbo_loss: batch size mismatch");

    const double scale = model.input_scale;
    const double sigma2_model = model.sigma2_train * scale * scale;
    if (!(sigma2_model > 0.0))
        throw std::invalid_argument("elbo_loss: positive sigma2_train required");

    Tensor y2 = Tensor::zeros({batch, 2, n});
    Eigen::MatrixXd cbar(batch, m.ctx_feat);
    for (int b = 0; b < batch; ++b) {
        if (y[b].size() != n)
            throw std::invalid_argument("elbo_loss: observation length mismatch");
        for (int i = 0; i < n; ++i) {
            y2.v[(static_cast<size_t>(b) * 2) * n + i] = scale * y[b][i].real();
            y2.v[(static_cast<size_t>(b) * 2 + 1) * n + i] = scale * y[b][i].imag();
        }
        cbar.row(b) = model.encode(ctx[b]).transpose();
    }

    CvaeModel::Impl::EncWs ews;
    CvaeModel::Impl::DecWs dws;
    CvaeModel::Impl::PriWs pws;

    HeadSplit q = split_latent_head(m.enc_train(y2, cbar, ews), nl);
    HeadSplit p = split_latent_head(m.pri_train(cbar, pws), nl);

    const Eigen::ArrayXXd vq = q.lv.array().exp();
    const Eigen::ArrayXXd vp = p.lv.array().exp();
    const Eigen::ArrayXXd sd_q = (0.5 * q.lv).array().exp();
    const Eigen::MatrixXd z = q.mu.array() + sd_q * eps.array();

    Tensor spec = m.dec_train(z, cbar, dws);

    Tensor dspec = Tensor::zeros({batch, 2 * n});
    double loglik_sum = 0.0;
    double kl_sum = 0.0;
    Eigen::VectorXcd yb(n);
    SpectralCovariance sc;
    sc.noise_variance = sigma2_model;
    for (int b = 0; b < batch; ++b) {
        for (int i = 0; i < n; ++i)
            yb[i] = scale * y[b][i];
        sc.spectrum = Eigen::Map<const Eigen::VectorXd>(
            spec.v.data() + static_cast<size_t>(b) * 2 * n, 2 * n);
        const LoglikGrad lg = gauss_loglik_grad(yb, sc);
        loglik_sum += lg.loglik;
        for (int k = 0; k < 2 * n; ++k)
            dspec.v[static_cast<size_t>(b) * 2 * n + k] = -lg.grad[k] / batch;

        double kl_b = 0.0;
        for (int j = 0; j < nl; ++j) {
            const double dm = q.mu(b, j) - p.mu(b, j);
            kl_b += 0.5 * (p.lv(b, j) - q.lv(b, j) +
                           (vq(b, j) + dm * dm) / vp(b, j) - 1.0);
        }
        kl_sum += std::max(kl_b, 0.0);
    }

    const Eigen::MatrixXd dz = m.dec_backward(dspec, dws);

    const double w = beta / batch;
    const Eigen::ArrayXXd dmean = (q.mu - p.mu).array() / vp; // d KL / d mu_q
    Eigen::MatrixXd dmu_q = dz.array() + w * dmean;
    Eigen::MatrixXd dlv_q =
        (dz.array() * eps.array() * 0.5 * sd_q + w * 0.5 * (vq / vp - 1.0)) * q.mask;
    m.enc_backward(pack_latent_grad(dmu_q, dlv_q), ews);

    Eigen::MatrixXd dmu_p = (-w * dmean).matrix();
    Eigen::MatrixXd dlv_p =
        (w * 0.5 *
         (1.0 - (vq + (q.mu - p.mu).array().square()) / vp) * p.mask)
            .matrix();
    m.pri_backward(pack_latent_grad(dmu_p, dlv_p), pws);

    ElboStats st;
    st.loglik = loglik_sum / batch;
    st.kl = kl_sum / batch;
    st.loss = -st.loglik + beta * st.kl;
    st.elbo = st.loglik - st.kl;
    return st;
}

TrainResult train_cvae(CvaeModel& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    const int ap = model.ap_index();
    const int64_t total = static_cast<int64_t>(data.records.size());
    if (total == 0)
        throw std::invalid_argument("train_cvae: empty dataset");
    if (ap < 0 || ap >= static_cast<int>(data.records.front().noisy.size()))
        throw std::invalid_argument("train_cvae: ap_index not present in the dataset");

    double mean_power = 0.0;
    for (const auto& rec : data.records)
        mean_power += rec.noisy[ap].squaredNorm() / model.n_antennas();
    mean_power /= static_cast<double>(total);
    if (!(mean_power > 0.0))
        throw std::runtime_error("train_cvae: degenerate observations");
    model.input_scale = 1.0 / std::sqrt(mean_power);
    model.sigma2_train = data.noise_variance;
    if (!(model.sigma2_train > 0.0))
        throw std::invalid_argument("train_cvae: dataset noise variance must be positive");

    auto params = model.trainable_parameters();
    AdamState adam;
    adam.cfg.lr = cfg.learning_rate;
    adam.init(params);

    const int64_t bsz = std::min<int64_t>(cfg.batch_size, total);
    if (bsz < 2)
        throw std::invalid_argument("train_cvae: dataset too small for a batch of 2");

    // batch plan per epoch: full batches, plus the remainder when it still
    // holds two samples
    std::vector<std::pair<int64_t, int64_t>> plan; // (start, size)
    for (int64_t s = 0; s + bsz <= total; s += bsz)
        plan.emplace_back(s, bsz);
    const int64_t rem = total % bsz;
    if (rem >= 2)
        plan.emplace_back(total - rem, rem);

    const int64_t steps_total = static_cast<int64_t>(cfg.epochs) * plan.size();
    const int64_t warmup_steps = std::llround(cfg.kl_warmup_fraction * steps_total);

    Rng order_rng(Rng::derive(cfg.seed, 0x0DDE5, 0));
    Rng eps_rng(Rng::derive(cfg.seed, 0xE9A11, 0));

    std::vector<int64_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);

    TrainResult out;
    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int64_t i = total - 1; i > 0; --i) {
            const auto j = static_cast<int64_t>(order_rng.uniform() * (i + 1));
            std::swap(idx[i], idx[std::min(j, i)]);
        }

        double elbo_acc = 0.0;
        int64_t count = 0;
        for (const auto& [start, size] : plan) {
            std::vector<Eigen::VectorXcd> yb(size);
            std::vector<ContextVector> cb(size);
            for (int64_t b = 0; b < size; ++b) {
                const auto& rec = data.records[idx[start + b]];
                yb[b] = rec.noisy[ap];
                cb[b] = rec.context;
            }
            Eigen::MatrixXd eps(size, model.latent_dim());
            for (int64_t b = 0; b < size; ++b)
                for (int j = 0; j < model.latent_dim(); ++j)
                    eps(b, j) = eps_rng.normal();

            const double beta =
                warmup_steps > 0
                    ? std::min(1.0, static_cast<double>(step + 1) / warmup_steps)
                    : 1.0;

            for (auto* p : params)
                p->zero_grad();
            const ElboStats st = elbo_loss(model, yb, cb, beta, eps);
            if (!std::isfinite(st.loss)) {
                std::ostringstream msg;
                msg << "train_cvae: non-finite loss at epoch " << epoch + 1 << " step " << step
                    << " (loglik " << st.loglik << ", kl " << st.kl << ")";
                throw std::runtime_error(msg.str());
            }
            adam_step(params, adam);

            elbo_acc += st.elbo * size;
            count += size;
            ++step;
        }
        out.elbo_per_epoch.push_back(elbo_acc / count);
    }
    return out;
}

SpectralCovariance predict_stats_context(const CvaeModel& model, const ContextVector& c) {
    const Eigen::VectorXd cbar = model.encode(c);
    const LatentGaussian prior = model.prior_forward(cbar);
    SpectralCovariance sc = model.decoder_forward(prior.mean, cbar);
    const double s2 = model.input_scale * model.input_scale;
    sc.spectrum /= s2;
    sc.noise_variance = model.sigma2_train;
    return sc;
}

SpectralCovariance predict_stats_csi(const CvaeModel& model, const Eigen::VectorXcd& y,
                                     const ContextVector& c) {
    const Eigen::VectorXd cbar = model.encode(c);
    const LatentGaussian post = model.encoder_forward(y, cbar);
    SpectralCovariance sc = model.decoder_forward(post.mean, cbar);
    const double s2 = model.input_scale * model.input_scale;
    sc.spectrum /= s2;
    sc.noise_variance = model.sigma2_train;
    return sc;
}

} // namespace ctxcsi
