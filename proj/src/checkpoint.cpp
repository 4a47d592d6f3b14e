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

#include "ctxcsi/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctxcsi {

namespace {

template <typename T> void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T> T take(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is)
        throw std::runtime_error("CKP1: truncated file");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& is) {
    const auto len = take<uint32_t>(is);
    if (len > (1u << 20))
        throw std::runtime_error("CKP1: implausible string length");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is)
        throw std::runtime_error("CKP1: truncated file");
    return s;
}

uint64_t dims_numel(const std::vector<uint64_t>& dims) {
    uint64_t n = 1;
    for (uint64_t d : dims)
        n *= d;
    return n;
}

} // namespace

bool Checkpoint::has(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name)
            return true;
    return false;
}

const NamedArray& Checkpoint::find(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name)
            return a;
    throw std::runtime_error("checkpoint: missing array '" + name + "'");
}

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw std::runtime_error("CKP1: cannot open for writing: " + path);
    os.write("CKP1\0\0\0\0", 8);
    put<uint32_t>(os, 1);
    put_string(os, ck.method);
    put_string(os, ck.scene_hash);
    put<uint32_t>(os, static_cast<uint32_t>(ck.arrays.size()));
    for (const auto& a : ck.arrays) {
        put_string(os, a.name);
        put<uint32_t>(os, static_cast<uint32_t>(a.dims.size()));
        for (uint64_t d : a.dims)
            put<uint64_t>(os, d);
        if (a.values.size() != dims_numel(a.dims))
            throw std::runtime_error("CKP1: array size does not match dims: " + a.name);
        os.write(reinterpret_cast<const char*>(a.values.data()),
                 static_cast<std::streamsize>(a.values.size() * sizeof(float)));
    }
    if (!os)
        throw std::runtime_error("CKP1: write failure: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("CKP1: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "CKP1\0\0\0\0", 8) != 0)
        throw std::runtime_error("CKP1: bad magic: " + path);
    if (take<uint32_t>(is) != 1)
        throw std::runtime_error("CKP1: unsupported version");

    Checkpoint ck;
    ck.method = take_string(is);
    ck.scene_hash = take_string(is);
    const auto count = take<uint32_t>(is);
    ck.arrays.resize(count);
    for (auto& a : ck.arrays) {
        a.name = take_string(is);
        const auto rank = take<uint32_t>(is);
        if (rank > 8)
            throw std::runtime_error("CKP1: implausible rank");
        a.dims.resize(rank);
        for (auto& d : a.dims)
            d = take<uint64_t>(is);
        const uint64_t n = dims_numel(a.dims);
        if (n > (1ull << 31))
            throw std::runtime_error("CKP1: implausible array size");
        a.values.resize(n);
        is.read(reinterpret_cast<char*>(a.values.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!is)
            throw std::runtime_error("CKP1: truncated file");
    }
    return ck;
}

// ------------------------------------------------------------------ cVAE ---

namespace {

NamedArray scalar_array(const std::string& name, double v) {
    return {name, {1}, {static_cast<float>(v)}};
}

NamedArray from_state(const std::string& prefix, const StateRef& ref) {
    NamedArray a;
    a.name = prefix + ref.name;
    for (int d : ref.shape)
        a.dims.push_back(static_cast<uint64_t>(d));
    a.values.reserve(ref.values->size());
    for (double x : *ref.values)
        a.values.push_back(static_cast<float>(x));
    return a;
}

std::string ap_prefix(int s) { return "ap" + std::to_string(s) + "."; }

} // namespace

Checkpoint cvae_to_checkpoint(std::vector<CvaeModel>& models, const std::string& method,
                              const std::string& scene_hash) {
    if (models.empty())
        throw std::invalid_argument("cvae_to_checkpoint: no models");
    Checkpoint ck;
    ck.method = method;
    ck.scene_hash = scene_hash;
    ck.arrays.push_back(scalar_array("meta.num_aps", static_cast<double>(models.size())));
    for (auto& model : models) {
        const std::string p = ap_prefix(model.ap_index());
        ck.arrays.push_back({p + "meta.arch",
                             {4},
                             {static_cast<float>(model.n_antennas()),
                              static_cast<float>(model.context_dim()),
                              static_cast<float>(model.latent_dim()),
                              static_cast<float>(model.base_channels())}});
        ck.arrays.push_back({p + "meta.encoding",
                             {3},
                             {static_cast<float>(model.encoding().k),
                              static_cast<float>(model.encoding().t_min),
                              static_cast<float>(model.encoding().t_max)}});
        ck.arrays.push_back(scalar_array(p + "meta.sigma2_train", model.sigma2_train));
        ck.arrays.push_back(scalar_array(p + "meta.input_scale", model.input_scale));
        for (const StateRef& ref : model.state_arrays())
            ck.arrays.push_back(from_state(p, ref));
    }
    return ck;
}

std::vector<CvaeModel> cvae_from_checkpoint(const Checkpoint& ck,
                                            const std::string& expected_scene_hash) {
    if (ck.method != "cvae-context" && ck.method != "cvae-pos")
        throw std::runtime_error("checkpoint: method '" + ck.method + "' is not a cVAE");
    if (ck.scene_hash != expected_scene_hash)
        throw std::runtime_error("checkpoint: scene hash mismatch (checkpoint " + ck.scene_hash +
                                 ", config " + expected_scene_hash + ")");
    const int n_aps = static_cast<int>(ck.find("meta.num_aps").values.at(0));
    if (n_aps < 1 || n_aps > 4096)
        throw std::runtime_error("checkpoint: implausible AP count");

    std::vector<CvaeModel> models;
    models.reserve(n_aps);
    for (int s = 0; s < n_aps; ++s) {
        const std::string p = ap_prefix(s);
        const auto& arch = ck.find(p + "meta.arch").values;
        const auto& enc = ck.find(p + "meta.encoding").values;
        if (arch.size() != 4 || enc.size() != 3)
            throw std::runtime_error("checkpoint: malformed meta arrays");
        EncodingConfig e;
        e.k = static_cast<int>(enc[0]);
        e.t_min = enc[1];
        e.t_max = enc[2];
        CvaeModel model(s, static_cast<int>(arch[0]), static_cast<int>(arch[1]),
                        static_cast<int>(arch[2]), static_cast<int>(arch[3]), e, /*init_seed=*/0);
        model.sigma2_train = ck.find(p + "meta.sigma2_train").values.at(0);
        model.input_scale = ck.find(p + "meta.input_scale").values.at(0);
        for (StateRef ref : model.state_arrays()) {
            const NamedArray& a = ck.find(p + ref.name);
            if (a.values.size() != ref.values->size())
                throw std::runtime_error("checkpoint: shape mismatch for " + a.name);
            for (size_t i = 0; i < a.values.size(); ++i)
                (*ref.values)[i] = static_cast<double>(a.values[i]);
        }
        models.push_back(std::move(model));
    }
    return models;
}

// ------------------------------------------------------------------ CGMM ---

Checkpoint cgmm_to_checkpoint(const CgmmModel& model, const std::string& scene_hash) {
    Checkpoint ck;
    ck.method = "cgmm";
    ck.scene_hash = scene_hash;
    const int m = model.components();
    const int n_aps = static_cast<int>(model.channel_moments.empty()
                                           ? 0
                                           : model.channel_moments.front().size());
    ck.arrays.push_back({"meta",
                         {3},
                         {static_cast<float>(m), static_cast<float>(n_aps),
                          static_cast<float>(model.sigma2)}});

    NamedArray w{"weights", {static_cast<uint64_t>(m)}, {}};
    for (int j = 0; j < m; ++j)
        w.values.push_back(static_cast<float>(model.weights[j]));
    ck.arrays.push_back(std::move(w));

    NamedArray means{"means", {static_cast<uint64_t>(m), 4}, {}};
    NamedArray vars{"vars", {static_cast<uint64_t>(m), 4}, {}};
    for (int j = 0; j < m; ++j)
        for (int d = 0; d < 4; ++d) {
            means.values.push_back(static_cast<float>(model.means(j, d)));
            vars.values.push_back(static_cast<float>(model.vars(j, d)));
        }
    ck.arrays.push_back(std::move(means));
    ck.arrays.push_back(std::move(vars));

    for (int s = 0; s < n_aps; ++s) {
        const auto n = model.channel_moments.front()[s].rows();
        NamedArray a{"ap" + std::to_string(s) + ".moments",
                     {static_cast<uint64_t>(m), static_cast<uint64_t>(n),
                      static_cast<uint64_t>(n), 2},
                     {}};
        a.values.reserve(static_cast<size_t>(m) * n * n * 2);
        for (int j = 0; j < m; ++j) {
            const auto& cmat = model.channel_moments[j][s];
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index col = 0; col < n; ++col) {
                    a.values.push_back(static_cast<float>(cmat(r, col).real()));
                    a.values.push_back(static_cast<float>(cmat(r, col).imag()));
                }
        }
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

CgmmModel cgmm_from_checkpoint(const Checkpoint& ck, const std::string& expected_scene_hash) {
    if (ck.method != "cgmm")
        throw std::runtime_error("checkpoint: method '" + ck.method + "' is not cgmm");
    if (ck.scene_hash != expected_scene_hash)
        throw std::runtime_error("checkpoint: scene hash mismatch (checkpoint " + ck.scene_hash +
                                 ", config " + expected_scene_hash + ")");
    const auto& meta = ck.find("meta").values;
    if (meta.size() != 3)
        throw std::runtime_error("checkpoint: malformed cgmm meta");
    const int m = static_cast<int>(meta[0]);
    const int n_aps = static_cast<int>(meta[1]);

    CgmmModel model;
    model.sigma2 = meta[2];
    model.weights.resize(m);
    const auto& w = ck.find("weights").values;
    for (int j = 0; j < m; ++j)
        model.weights[j] = w.at(j);
    model.means.resize(m, 4);
    model.vars.resize(m, 4);
    const auto& means = ck.find("means").values;
    const auto& vars = ck.find("vars").values;
    for (int j = 0; j < m; ++j)
        for (int d = 0; d < 4; ++d) {
            model.means(j, d) = means.at(j * 4 + d);
            model.vars(j, d) = vars.at(j * 4 + d);
        }
    model.channel_moments.assign(m, std::vector<Eigen::MatrixXcd>(n_aps));
    for (int s = 0; s < n_aps; ++s) {
        const NamedArray& a = ck.find("ap" + std::to_string(s) + ".moments");
        if (a.dims.size() != 4 || a.dims[0] != static_cast<uint64_t>(m) || a.dims[3] != 2)
            throw std::runtime_error("checkpoint: malformed cgmm moments");
        const auto n = static_cast<Eigen::Index>(a.dims[1]);
        size_t idx = 0;
        for (int j = 0; j < m; ++j) {
            Eigen::MatrixXcd cmat(n, n);
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index col = 0; col < n; ++col) {
                    const double re = a.values[idx++];
                    const double im = a.values[idx++];
                    cmat(r, col) = {re, im};
                }
            model.channel_moments[j][s] = std::move(cmat);
        }
    }
    return model;
}

} // namespace ctxcsi
