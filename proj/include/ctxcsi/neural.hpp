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

#ifndef CTXCSI_NEURAL_HPP
#define CTXCSI_NEURAL_HPP

#include "ctxcsi/rng.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <new>
#include <string>
#include <vector>

namespace ctxcsi {

// 64-byte aligned storage for every tensor buffer. Keeping all buffers on the
// same alignment keeps SIMD reduction orders identical across allocations,
// which the byte-level reproducibility contract depends on.
template <typename T> struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U> AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), alignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U> bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

using AlignedVec = std::vector<double, AlignedAllocator<double>>;

// Dense row-major tensor. Convolutions use [batch, channels, length],
// dense/batchnorm layers use [batch, features]; a rank-2 [channels, length]
// input to a convolution is treated as batch 1.
struct Tensor {
    std::vector<int> shape;
    AlignedVec v;

    Tensor() = default;
    static Tensor zeros(std::vector<int> shape);

    int rank() const { return static_cast<int>(shape.size()); }
    int64_t numel() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    AlignedVec value;
    AlignedVec grad;

    ParamTensor() = default;
    ParamTensor(std::string name, std::vector<int> shape);

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// He-uniform fan-in initialization, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void kaiming_uniform(ParamTensor& p, int fan_in, Rng& rng);

// 1-D cross-correlation, output length floor((L + 2*pad - k)/stride) + 1.
class Conv1d {
  public:
    ParamTensor w; // [cout, cin, k]
    ParamTensor b; // [cout]

    Conv1d(const std::string& name, int cin, int cout, int k, int stride, int pad, Rng& rng);

    struct Cache {
        Eigen::MatrixXd cols; // [cin*k, batch*lout]
        std::vector<int> in_shape;
        bool rank2 = false;
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    // Accumulates w.grad / b.grad, returns d loss / d input.
    Tensor backward(const Tensor& dy, const Cache& cache);

    int cin() const { return cin_; }
    int cout() const { return cout_; }

  private:
    int cin_, cout_, k_, stride_, pad_;
};

class Dense {
  public:
    ParamTensor w; // [out, in]
    ParamTensor b; // [out]

    Dense(const std::string& name, int in, int out, Rng& rng);

    struct Cache {
        Tensor x;
    };

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const; // x: [batch, in]
    Tensor backward(const Tensor& dy, const Cache& cache);

    int in() const { return in_; }
    int out() const { return out_; }

  private:
    int in_, out_;
};

// Feature-wise batch normalization. A [batch, features] input normalizes over
// the batch; a [batch, channels, length] input normalizes each channel over
// batch x positions. Training mode with fewer than two samples per feature is
// an error.
class BatchNorm {
  public:
    ParamTensor gamma, beta;
    AlignedVec running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    BatchNorm(const std::string& name, int features);

    struct Cache {
        Tensor xhat;
        Eigen::VectorXd inv_std;
    };

    Tensor forward_train(const Tensor& x, Cache& cache); // updates running stats
    Tensor forward_eval(const Tensor& x) const;
    Tensor backward(const Tensor& dy, const Cache& cache);

    int features() const { return features_; }

  private:
    int features_;
};

struct Relu {
    struct Cache {
        Tensor x;
    };
    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

// Nearest-neighbor 2x upsampling along the last axis of [batch, channels, length].
struct UpsampleNearest2 {
    struct Cache {
        std::vector<int> in_shape;
    };
    Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

// y = exp(clamp(t, lo, hi)); zero gradient outside the open clamp interval.
struct ExpClamp {
    double lo = -20.0;
    double hi = 20.0;
    struct Cache {
        Tensor t;
        Tensor y;
    };
    Tensor forward(const Tensor& t, Cache* cache = nullptr) const;
    Tensor backward(const Tensor& dy, const Cache& cache) const;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    int64_t step = 0;
    std::vector<AlignedVec> m, v;

    void init(const std::vector<ParamTensor*>& params);
};

// Standard bias-corrected Adam update over the registered parameter list.
// A parameter with zero gradient and zero moments stays unchanged.
void adam_step(const std::vector<ParamTensor*>& params, AdamState& st);

} // namespace ctxcsi

#endif
