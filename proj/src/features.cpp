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

#include "ctxcsi/features.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxcsi {

void EncodingConfig::validate() const {
    if (k < 2)
        throw std::invalid_argument("EncodingConfig: k must be >= 2");
    if (!(t_min > 0.0) || !(t_min < t_max))
        throw std::invalid_argument("EncodingConfig: require 0 < t_min < t_max");
}

Eigen::VectorXd encode_context(const Eigen::VectorXd& c, const EncodingConfig& cfg) {
    cfg.validate();
    const int k = cfg.k;
    const double ratio = cfg.t_min / cfg.t_max;
    Eigen::VectorXd out(c.size() * 2 * k);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (!std::isfinite(c[i]))
            throw std::invalid_argument("encode_context: non-finite input");
        for (int kk = 0; kk < k; ++kk) {
            const double arg = 2.0 * 3.141592653589793 * (c[i] / cfg.t_min) *
                               std::pow(ratio, static_cast<double>(kk) / (k - 1));
            out[i * 2 * k + kk] = std::sin(arg);
            out[i * 2 * k + k + kk] = std::cos(arg);
        }
    }
    return out;
}

} // namespace ctxcsi
