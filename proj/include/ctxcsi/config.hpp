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

#ifndef CTXCSI_CONFIG_HPP
#define CTXCSI_CONFIG_HPP

#include "ctxcsi/cvae.hpp"
#include "ctxcsi/evalsel.hpp"
#include "ctxcsi/scene.hpp"

#include <cstdint>
#include <string>

namespace ctxcsi {

struct DataConfig {
    int64_t num_samples = 20000;
    double snr_db = 10.0;
    uint64_t seed = 101;
};

struct CgmmTrainConfig {
    int components = 64;
    int iterations = 100;
    uint64_t seed = 301;
};

struct EvalConfig {
    int testset_size = 1000;
    uint64_t seed = 401;
    T3Region t3_region;
};

// Full run configuration: scene / data / train / eval sections. Keys that are
// absent fall back to the documented defaults; keys that are not recognized
// are an error.
struct RunConfig {
    SceneConfig scene = SceneConfig::defaults();
    DataConfig data;
    TrainConfig train_cvae_context;
    TrainConfig train_cvae_pos;
    CgmmTrainConfig cgmm;
    EvalConfig eval;
};

RunConfig default_run_config();

// Parses the JSON run configuration; throws std::runtime_error with a
// descriptive message on malformed content or unknown keys.
RunConfig load_run_config(const std::string& path);

} // namespace ctxcsi

#endif
