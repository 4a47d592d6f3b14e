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

#ifndef CTXCSI_FEATURES_HPP
#define CTXCSI_FEATURES_HPP

#include <Eigen/Dense>

namespace ctxcsi {

// Fourier feature encoding with K frequencies geometrically spaced between
// periods t_min and t_max (meters).
struct EncodingConfig {
    int k = 8;
    double t_min = 0.1;
    double t_max = 20.0;

    void validate() const;
};

// Maps each entry c_i to [sin(w_0 c_i), ..., sin(w_{K-1} c_i),
// cos(w_0 c_i), ..., cos(w_{K-1} c_i)] with
// w_k = (2*pi / t_min) * (t_min / t_max)^(k / (K-1)); encodings are
// concatenated in entry order, giving length c.size() * 2K.
Eigen::VectorXd encode_context(const Eigen::VectorXd& c, const EncodingConfig& cfg);

} // namespace ctxcsi

#endif
