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

#include "ctxcsi/neural.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ctxcsi {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    int64_t n = 1;
    for (int d : t.shape) {
        if (d < 0)
            throw std::invalid_argument("Tensor: negative dimension");
        n *= d;
    }
    t.v.assign(static_cast<size_t>(n), 0.0);
    return t;
}

int64_t Tensor::numel() const {
    int64_t n = 1;
    for (int d : shape)
        n *= d;
    return n;
}

ParamTensor::ParamTensor(std::string name_, std::vector<int> shape_)
    : name(std::move(name_)), shape(std::move(shape_)) {
    int64_t n = 1;
    for (int d : shape)
        n *= d;
    value.assign(static_cast<size_t>(n), 0.0);
    grad.assign(static_cast<size_t>(n), 0.0);
}

void kaiming_uniform(ParamTensor& p, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& x : p.value)
        x = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------- Conv1d ---

Conv1d::Conv1d(const std::string& name, int cin, int cout, int k, int stride, int pad, Rng& rng)
    : w(name + ".w", {cout, cin, k}), b(name + ".b", {cout}), cin_(cin), cout_(cout), k_(k),
      stride_(stride), pad_(pad) {
    if (cin < 1 || cout < 1 || k < 1 || stride < 1 || pad < 0)
        throw std::invalid_argument("Conv1d: bad geometry");
    kaiming_uniform(w, cin * k, rng);
}

Tensor Conv1d::forward(const Tensor& x, Cache* cache) const {
    const bool rank2 = x.rank() == 2;
    if (!rank2 && x.rank() != 3)
        throw std::invalid_argument("Conv1d: input must be [C,L] or [B,C,L]");
    const int batch = rank2 ? 1 : x.shape[0];
    const int cin = rank2 ? x.shape[0] : x.shape[1];
    const int lin = rank2 ? x.shape[1] : x.shape[2];
    if (cin != cin_)
        throw std::invalid_argument("Conv1d: channel mismatch");
    if (lin + 2 * pad_ < k_)
        throw std::invalid_argument("Conv1d: input shorter than kernel");
    const int lout = (lin + 2 * pad_ - k_) / stride_ + 1;

    Eigen::MatrixXd cols(cin_ * k_, static_cast<Eigen::Index>(batch) * lout);
    cols.setZero();
    for (int bi = 0; bi < batch; ++bi) {
        const double* xb = x.v.data() + static_cast<size_t>(bi) * cin * lin;
        for (int l = 0; l < lout; ++l) {
            double* col = cols.col(static_cast<Eigen::Index>(bi) * lout + l).data();
            const int base = l * stride_ - pad_;
            for (int ci = 0; ci < cin; ++ci)
                for (int kk = 0; kk < k_; ++kk) {
                    const int pos = base + kk;
                    if (pos >= 0 && pos < lin)
                        col[ci * k_ + kk] = xb[ci * lin + pos];
                }
        }
    }

    Eigen::Map<const RowMat> wm(w.value.data(), cout_, cin_ * k_);
    Eigen::MatrixXd y = wm * cols; // [cout, batch*lout]

    Tensor out = rank2 ? Tensor::zeros({cout_, lout}) : Tensor::zeros({batch, cout_, lout});
    for (int bi = 0; bi < batch; ++bi)
        for (int co = 0; co < cout_; ++co) {
            double* ob = out.v.data() + (static_cast<size_t>(bi) * cout_ + co) * lout;
            const double bias = b.value[co];
            for (int l = 0; l < lout; ++l)
                ob[l] = y(co, static_cast<Eigen::Index>(bi) * lout + l) + bias;
        }

    if (cache) {
        cache->cols = std::move(cols);
        cache->in_shape = {batch, cin, lin};
        cache->rank2 = rank2;
    }
    return out;
}

Tensor Conv1d::backward(const Tensor& dy, const Cache& cache) {
    const int batch = cache.in_shape[0];
    const int cin = cache.in_shape[1];
    const int lin = cache.in_shape[2];
    const int lout = static_cast<int>(cache.cols.cols()) / batch;

    Eigen::MatrixXd dym(cout_, static_cast<Eigen::Index>(batch) * lout);
    for (int bi = 0; bi < batch; ++bi)
        for (int co = 0; co < cout_; ++co) {
            const double* db = dy.v.data() + (static_cast<size_t>(bi) * cout_ + co) * lout;
            for (int l = 0; l < lout; ++l)
                dym(co, static_cast<Eigen::Index>(bi) * lout + l) = db[l];
        }

    Eigen::Map<RowMat> wg(w.grad.data(), cout_, cin_ * k_);
    wg.noalias() += dym * cache.cols.transpose();
    for (int co = 0; co < cout_; ++co)
        b.grad[co] += dym.row(co).sum();

    Eigen::Map<const RowMat> wm(w.value.data(), cout_, cin_ * k_);
    Eigen::MatrixXd dcols = wm.transpose() * dym; // [cin*k, batch*lout]

    Tensor dx = cache.rank2 ? Tensor::zeros({cin, lin}) : Tensor::zeros({batch, cin, lin});
    for (int bi = 0; bi < batch; ++bi) {
        double* xb = dx.v.data() + static_cast<size_t>(bi) * cin * lin;
        for (int l = 0; l < lout; ++l) {
            const double* col = dcols.col(static_cast<Eigen::Index>(bi) * lout + l).data();
            const int base = l * stride_ - pad_;
            for (int ci = 0; ci < cin; ++ci)
                for (int kk = 0; kk < k_; ++kk) {
                    const int pos = base + kk;
                    if (pos >= 0 && pos < lin)
                        xb[ci * lin + pos] += col[ci * k_ + kk];
                }
        }
    }
    return dx;
}

// ----------------------------------------------------------------- Dense ---

Dense::Dense(const std::string& name, int in, int out, Rng& rng)
    : w(name + ".w", {out, in}), b(name + ".b", {out}), in_(in), out_(out) {
    if (in < 1 || out < 1)
        throw std::invalid_argument("Dense: bad geometry");
    kaiming_uniform(w, in, rng);
}

Tensor Dense::forward(const Tensor& x, Cache* cache) const {
    if (x.rank() != 2 || x.shape[1] != in_)
        throw std::invalid_argument("Dense: input must be [batch, in]");
    const int batch = x.shape[0];
    Eigen::Map<const RowMat> xm(x.v.data(), batch, in_);
    Eigen::Map<const RowMat> wm(w.value.data(), out_, in_);
    Tensor out = Tensor::zeros({batch, out_});
    Eigen::Map<RowMat> om(out.v.data(), batch, out_);
    om.noalias() = xm * wm.transpose();
    Eigen::Map<const Eigen::VectorXd> bv(b.value.data(), out_);
    om.rowwise() += bv.transpose();
    if (cache)
        cache->x = x;
    return out;
}

Tensor Dense::backward(const Tensor& dy, const Cache& cache) {
    const int batch = cache.x.shape[0];
    Eigen::Map<const RowMat> dym(dy.v.data(), batch, out_);
    Eigen::Map<const RowMat> xm(cache.x.v.data(), batch, in_);
    Eigen::Map<RowMat> wg(w.grad.data(), out_, in_);
    wg.noalias() += dym.transpose() * xm;
    Eigen::Map<Eigen::VectorXd> bg(b.grad.data(), out_);
    bg.noalias() += dym.colwise().sum().transpose();

    Eigen::Map<const RowMat> wm(w.value.data(), out_, in_);
    Tensor dx = Tensor::zeros({batch, in_});
    Eigen::Map<RowMat> dxm(dx.v.data(), batch, in_);
    dxm.noalias() = dym * wm;
    return dx;
}

// ------------------------------------------------------------- BatchNorm ---

namespace {

// Iteration geometry for [batch, F] and [batch, C, L] inputs.
struct BnLayout {
    int features;
    int64_t samples;   // per feature
    int64_t f_stride;  // step between features at fixed sample
    int64_t outer;     // sample groups
    int64_t inner;     // contiguous samples per group at fixed feature
    int64_t o_stride;  // step between groups
};

BnLayout bn_layout(const std::vector<int>& shape) {
    if (shape.size() == 2) {
        // x[b, f]
        return {shape[1], shape[0], 1, shape[0], 1, shape[1]};
    }
    if (shape.size() == 3) {
        // x[b, c, l]
        return {shape[1], static_cast<int64_t>(shape[0]) * shape[2],
                static_cast<int64_t>(shape[2]), shape[0], shape[2],
                static_cast<int64_t>(shape[1]) * shape[2]};
    }
    throw std::invalid_argument("BatchNorm: input must be rank 2 or 3");
}

} // namespace

BatchNorm::BatchNorm(const std::string& name, int features)
    : gamma(name + ".gamma", {features}), beta(name + ".beta", {features}), features_(features) {
    std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
    running_mean.assign(features, 0.0);
    running_var.assign(features, 1.0);
}

Tensor BatchNorm::forward_train(const Tensor& x, Cache& cache) {
    const BnLayout ly = bn_layout(x.shape);
    if (ly.features != features_)
        throw std::invalid_argument("BatchNorm: feature mismatch");
    if (ly.samples < 2)
        throw std::invalid_argument("BatchNorm: batch of 1 in train mode");

    Tensor out = Tensor::zeros(x.shape);
    cache.xhat = Tensor::zeros(x.shape);
    cache.inv_std.resize(features_);

    for (int f = 0; f < features_; ++f) {
        double mean = 0.0;
        for (int64_t o = 0; o < ly.outer; ++o) {
            const double* p = x.v.data() + o * ly.o_stride + f * ly.f_stride;
            for (int64_t i = 0; i < ly.inner; ++i)
                mean += p[i];
        }
        mean /= static_cast<double>(ly.samples);
        double var = 0.0;
        for (int64_t o = 0; o < ly.outer; ++o) {
            const double* p = x.v.data() + o * ly.o_stride + f * ly.f_stride;
            for (int64_t i = 0; i < ly.inner; ++i)
                var += (p[i] - mean) * (p[i] - mean);
        }
        var /= static_cast<double>(ly.samples);

        const double inv = 1.0 / std::sqrt(var + eps);
        cache.inv_std[f] = inv;
        const double g = gamma.value[f];
        const double bt = beta.value[f];
        for (int64_t o = 0; o < ly.outer; ++o) {
            const double* p = x.v.data() + o * ly.o_stride + f * ly.f_stride;
            double* xh = cache.xhat.v.data() + o * ly.o_stride + f * ly.f_stride;
            double* yo = out.v.data() + o * ly.o_stride + f * ly.f_stride;
            for (int64_t i = 0; i < ly.inner; ++i) {
                xh[i] = (p[i] - mean) * inv;
                yo[i] = g * xh[i] + bt;
            }
        }

        const double unbiased =
            var * static_cast<double>(ly.samples) / static_cast<double>(ly.samples - 1);
        running_mean[f] = (1.0 - momentum) * running_mean[f] + momentum * mean;
        running_var[f] = (1.0 - momentum) * running_var[f] + momentum * unbiased;
    }
    return out;
}

Tensor BatchNorm::forward_eval(const Tensor& x) const {
    const BnLayout ly = bn_layout(x.shape);
    if (ly.features != features_)
        throw std::invalid_argument("BatchNorm: feature mismatch");
    Tensor out = Tensor::zeros(x.shape);
    for (int f = 0; f < features_; ++f) {
        const double inv = 1.0 / std::sqrt(running_var[f] + eps);
        const double g = gamma.value[f];
        const double bt = beta.value[f];
        const double m = running_mean[f];
        for (int64_t o = 0; o < ly.outer; ++o) {
            const double* p = x.v.data() + o * ly.o_stride + f * ly.f_stride;
            double* yo = out.v.data() + o * ly.o_stride + f * ly.f_stride;
            for (int64_t i = 0; i < ly.inner; ++i)
                yo[i] = g * (p[i] - m) * inv + bt;
        }
    }
    return out;
}

Tensor BatchNorm::backward(const Tensor& dy, const Cache& cache) {
    const BnLayout ly = bn_layout(dy.shape);
    Tensor dx = Tensor::zeros(dy.shape);
    const double n = static_cast<double>(ly.samples);

    for (int f = 0; f < features_; ++f) {
        const double g = gamma.value[f];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t o = 0; o < ly.outer; ++o) {
            const double* d = dy.v.data() + o * ly.o_stride + f * ly.f_stride;
            const double* xh = cache.xhat.v.data() + o * ly.o_stride + f * ly.f_stride;
            for (int64_t i = 0; i < ly.inner; ++i) {
                sum_dy += d[i];
                sum_dy_xhat += d[i] * xh[i];
            }
        }
        gamma.grad[f] += sum_dy_xhat;
        beta.grad[f] += sum_dy;

        const double inv = cache.inv_std[f];
        for (int64_t o = 0; o < ly.outer; ++o) {
            const double* d = dy.v.data() + o * ly.o_stride + f * ly.f_stride;
            const double* xh = cache.xhat.v.data() + o * ly.o_stride + f * ly.f_stride;
            double* out = dx.v.data() + o * ly.o_stride + f * ly.f_stride;
            for (int64_t i = 0; i < ly.inner; ++i)
                out[i] = g * inv / n * (n * d[i] - sum_dy - xh[i] * sum_dy_xhat);
        }
    }
    return dx;
}

// ------------------------------------------------------------ activations ---

Tensor Relu::forward(const Tensor& x, Cache* cache) const {
    Tensor out = x;
    for (auto& e : out.v)
        e = e > 0.0 ? e : 0.0;
    if (cache)
        cache->x = x;
    return out;
}

Tensor Relu::backward(const Tensor& dy, const Cache& cache) const {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i)
        dx.v[i] = cache.x.v[i] > 0.0 ? dy.v[i] : 0.0;
    return dx;
}

Tensor UpsampleNearest2::forward(const Tensor& x, Cache* cache) const {
    if (x.rank() != 3)
        throw std::invalid_argument("UpsampleNearest2: input must be [B,C,L]");
    const int batch = x.shape[0], ch = x.shape[1], len = x.shape[2];
    Tensor out = Tensor::zeros({batch, ch, 2 * len});
    for (int bc = 0; bc < batch * ch; ++bc) {
        const double* src = x.v.data() + static_cast<size_t>(bc) * len;
        double* dst = out.v.data() + static_cast<size_t>(bc) * 2 * len;
        for (int l = 0; l < len; ++l) {
            dst[2 * l] = src[l];
            dst[2 * l + 1] = src[l];
        }
    }
    if (cache)
        cache->in_shape = x.shape;
    return out;
}

Tensor UpsampleNearest2::backward(const Tensor& dy, const Cache& cache) const {
    const int batch = cache.in_shape[0], ch = cache.in_shape[1], len = cache.in_shape[2];
    Tensor dx = Tensor::zeros(cache.in_shape);
    for (int bc = 0; bc < batch * ch; ++bc) {
        const double* src = dy.v.data() + static_cast<size_t>(bc) * 2 * len;
        double* dst = dx.v.data() + static_cast<size_t>(bc) * len;
        for (int l = 0; l < len; ++l)
            dst[l] = src[2 * l] + src[2 * l + 1];
    }
    return dx;
}

Tensor ExpClamp::forward(const Tensor& t, Cache* cache) const {
    Tensor out = t;
    for (auto& e : out.v)
        e = std::exp(std::clamp(e, lo, hi));
    if (cache) {
        cache->t = t;
        cache->y = out;
    }
    return out;
}

Tensor ExpClamp::backward(const Tensor& dy, const Cache& cache) const {
    Tensor dt = dy;
    for (size_t i = 0; i < dt.v.size(); ++i) {
        const double t = cache.t.v[i];
        dt.v[i] = (t > lo && t < hi) ? dy.v[i] * cache.y.v[i] : 0.0;
    }
    return dt;
}

// ------------------------------------------------------------------ Adam ---

void AdamState::init(const std::vector<ParamTensor*>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto* p : params) {
        m.emplace_back(p->value.size(), 0.0);
        v.emplace_back(p->value.size(), 0.0);
    }
}

void adam_step(const std::vector<ParamTensor*>& params, AdamState& st) {
    if (st.m.size() != params.size())
        throw std::invalid_argument("adam_step: state not initialized for this parameter list");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        auto& mi = st.m[i];
        auto& vi = st.v[i];
        if (mi.size() != p.value.size())
            throw std::invalid_argument("adam_step: parameter size changed");
        for (size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            mi[j] = st.cfg.beta1 * mi[j] + (1.0 - st.cfg.beta1) * g;
            vi[j] = st.cfg.beta2 * vi[j] + (1.0 - st.cfg.beta2) * g * g;
            const double mhat = mi[j] / bc1;
            const double vhat = vi[j] / bc2;
            p.value[j] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
        }
    }
}

} // namespace ctxcsi
