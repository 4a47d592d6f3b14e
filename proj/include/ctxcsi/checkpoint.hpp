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

#ifndef CTXCSI_CHECKPOINT_HPP
#define CTXCSI_CHECKPOINT_HPP

#include "ctxcsi/baselines.hpp"
#include "ctxcsi/cvae.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ctxcsi {

struct NamedArray {
    std::string name;
    std::vector<uint64_t> dims;
    std::vector<float> values;
};

// Generic persistable container: method tag, scene hash and ordered named
// float arrays. CKP1 layout (little-endian): magic "CKP1\0\0\0\0",
// u32 version, length-prefixed method tag and scene hash, u32 array count,
// then per array a length-prefixed name, u32 rank, u64 dims and f32 values.
struct Checkpoint {
    std::string method;
    std::string scene_hash;
    std::vector<NamedArray> arrays;

    bool has(const std::string& name) const;
    const NamedArray& find(const std::string& name) const; // throws when absent
};

void write_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// cVAE model set <-> checkpoint. The method tag is "cvae-context" or
// "cvae-pos"; one parameter block per AP.
Checkpoint cvae_to_checkpoint(std::vector<CvaeModel>& models, const std::string& method,
                              const std::string& scene_hash);
std::vector<CvaeModel> cvae_from_checkpoint(const Checkpoint& ck,
                                            const std::string& expected_scene_hash);

Checkpoint cgmm_to_checkpoint(const CgmmModel& model, const std::string& scene_hash);
CgmmModel cgmm_from_checkpoint(const Checkpoint& ck, const std::string& expected_scene_hash);

} // namespace ctxcsi

#endif
