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

#include "ctxcsi/commands.hpp"

#include "ctxcsi/checkpoint.hpp"
#include "ctxcsi/config.hpp"
#include "ctxcsi/evalsel.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

namespace ctxcsi {

namespace {

struct LoadedConfig {
    RunConfig cfg;
    bool ok = false;
};

LoadedConfig try_load_config(const std::string& path) {
    LoadedConfig out;
    try {
        out.cfg = load_run_config(path);
        out.ok = true;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return out;
}

// trains the per-AP models concurrently; they share no mutable state
std::vector<TrainResult> train_all_aps(std::vector<CvaeModel>& models, const Dataset& data,
                                       const TrainConfig& base_cfg) {
    const size_t n = models.size();
    std::vector<TrainResult> traces(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> workers;
    workers.reserve(n);
    for (size_t s = 0; s < n; ++s) {
        workers.emplace_back([&, s]() {
            try {
                TrainConfig cfg = base_cfg;
                cfg.seed = Rng::derive(base_cfg.seed, 42, s);
                traces[s] = train_cvae(models[s], data, cfg);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
    }
    for (auto& w : workers)
        w.join();
    for (auto& err : errors)
        if (err)
            std::rethrow_exception(err);
    return traces;
}

void write_ccdf_csv(const std::vector<CcdfRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw std::runtime_error("cannot open for writing: " + path);
    os << "threshold,fraction\n";
    char buf[80];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", r.threshold, r.fraction);
        os << buf;
    }
    if (!os)
        throw std::runtime_error("write failure: " + path);
}

} // namespace

int cmd_gen_data(const std::string& config_path, const std::string& out_path,
                 std::optional<uint64_t> seed_override) {
    auto loaded = try_load_config(config_path);
    if (!loaded.ok)
        return 1;
    RunConfig& cfg = loaded.cfg;
    if (seed_override)
        cfg.data.seed = *seed_override;
    if (cfg.data.num_samples < 1) {
        std::cerr << "error: data.num_samples must be >= 1\n";
        return 1;
    }

    Dataset ds;
    try {
        ds = generate_dataset(cfg.scene, cfg.data.num_samples, cfg.data.snr_db, cfg.data.seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        write_dataset_csd1(ds, cfg.scene, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    std::printf("samples: %zu\n", ds.records.size());
    std::printf("noise variance: %.6e\n", ds.noise_variance);
    for (size_t s = 0; s < cfg.scene.aps.size(); ++s) {
        double power = 0.0;
        for (const auto& rec : ds.records)
            power += rec.clean[s].squaredNorm();
        power /= static_cast<double>(ds.records.size());
        const double snr = 10.0 * std::log10(cfg.scene.aps[s].tx_power * power /
                                             (cfg.scene.aps[s].num_antennas * ds.noise_variance));
        std::printf("empirical snr ap%zu: %.2f dB\n", s, snr);
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& method, const std::string& out_checkpoint,
              std::optional<uint64_t> seed_override) {
    auto loaded = try_load_config(config_path);
    if (!loaded.ok)
        return 1;
    RunConfig& cfg = loaded.cfg;

    Dataset ds;
    try {
        ds = read_dataset_csd1(dataset_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    ds.scene_hash = cfg.scene.hash();
    if (!ds.records.empty() && ds.records.front().clean.size() != cfg.scene.aps.size()) {
        std::cerr << "error: dataset AP count does not match the scene\n";
        return 1;
    }
    for (size_t s = 0; s < cfg.scene.aps.size() && !ds.records.empty(); ++s) {
        if (ds.records.front().clean[s].size() != cfg.scene.aps[s].num_antennas) {
            std::cerr << "error: dataset antenna count does not match the scene\n";
            return 1;
        }
    }

    Checkpoint ck;
    try {
        if (method == "cvae-context" || method == "cvae-pos") {
            TrainConfig tc = method == "cvae-context" ? cfg.train_cvae_context : cfg.train_cvae_pos;
            if (seed_override)
                tc.seed = *seed_override;
            const int ctx_dim = method == "cvae-context" ? 4 : 2;

            EncodingConfig enc; // paper defaults: K=8, 0.1 m .. 20 m
            std::vector<CvaeModel> models;
            for (size_t s = 0; s < cfg.scene.aps.size(); ++s)
                models.emplace_back(static_cast<int>(s), cfg.scene.aps[s].num_antennas, ctx_dim,
                                    16, 16, enc, Rng::derive(tc.seed, 7, s));

            const auto traces = train_all_aps(models, ds, tc);
            for (size_t s = 0; s < traces.size(); ++s) {
                const auto& t = traces[s].elbo_per_epoch;
                std::printf("ap%zu elbo: first epoch %.4f, final epoch %.4f (%zu epochs)\n", s,
                            t.front(), t.back(), t.size());
            }
            ck = cvae_to_checkpoint(models, method, cfg.scene.hash());
        } else if (method == "cgmm") {
            uint64_t seed = seed_override ? *seed_override : cfg.cgmm.seed;
            CgmmModel model =
                cgmm_fit(ds, cfg.scene, cfg.cgmm.components, seed, cfg.cgmm.iterations);
            std::printf("cgmm: %d components fitted on %zu samples\n", model.components(),
                        ds.records.size());
            ck = cgmm_to_checkpoint(model, cfg.scene.hash());
        } else {
            std::cerr << "error: unknown method '" << method << "'\n";
            return 1;
        }
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        if (what.find("non-finite loss") != std::string::npos) {
            std::cerr << "error: " << what << "\n";
            return 3;
        }
        std::cerr << "error: " << what << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        write_checkpoint(ck, out_checkpoint);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::printf("checkpoint written: %s\n", out_checkpoint.c_str());
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_context,
             const std::string& ckpt_pos, const std::string& ckpt_cgmm, const std::string& out_dir,
             std::optional<uint64_t> seed_override) {
    auto loaded = try_load_config(config_path);
    if (!loaded.ok)
        return 1;
    RunConfig& cfg = loaded.cfg;
    if (seed_override)
        cfg.eval.seed = *seed_override;
    const std::string hash = cfg.scene.hash();

    std::vector<CvaeModel> ctx_models, pos_models;
    CgmmModel cgmm;
    try {
        ctx_models = cvae_from_checkpoint(read_checkpoint(ckpt_context), hash);
        pos_models = cvae_from_checkpoint(read_checkpoint(ckpt_pos), hash);
        cgmm = cgmm_from_checkpoint(read_checkpoint(ckpt_cgmm), hash);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const double sigma2_eval = ctx_models.front().sigma2_train;
    TestSets sets;
    SelectionReport report;
    try {
        sets = build_testsets(cfg.scene, cfg.eval.testset_size, cfg.data.snr_db, cfg.eval.seed,
                              cfg.eval.t3_region, sigma2_eval);
        report = evaluate(ctx_models, pos_models, cgmm, cfg.scene, sets, sigma2_eval);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        std::filesystem::create_directories(out_dir);
        const std::string acc_path = out_dir + "/accuracy.csv";
        std::ofstream os(acc_path, std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot open for writing: " + acc_path);
        os << "method,t1,t2,t3\n";
        for (const auto& m : report.methods) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", m.name.c_str(), m.accuracy[0],
                          m.accuracy[1], m.accuracy[2]);
            os << buf;
        }
        if (!os)
            throw std::runtime_error("write failure: " + acc_path);

        const char* set_names[3] = {"t1", "t2", "t3"};
        for (const auto& m : report.methods)
            for (int set = 0; set < 3; ++set)
                write_ccdf_csv(ccdf_export(m.normalized_rates[set]),
                               out_dir + "/ccdf_" + set_names[set] + "_" + m.name + ".csv");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    std::printf("%-14s %8s %8s %8s\n", "method", "t1", "t2", "t3");
    for (const auto& m : report.methods)
        std::printf("%-14s %8.3f %8.3f %8.3f\n", m.name.c_str(), m.accuracy[0], m.accuracy[1],
                    m.accuracy[2]);
    return 0;
}

int cmd_export_ccdf(const std::string& values_path, const std::string& out_path) {
    std::ifstream is(values_path);
    if (!is) {
        std::cerr << "error: cannot open " << values_path << "\n";
        return 1;
    }
    std::vector<double> values;
    double v = 0.0;
    while (is >> v)
        values.push_back(v);
    if (!is.eof()) {
        std::cerr << "error: non-numeric content in " << values_path << "\n";
        return 1;
    }
    if (values.empty()) {
        std::cerr << "error: no values in " << values_path << "\n";
        return 1;
    }
    try {
        write_ccdf_csv(ccdf_export(values), out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace ctxcsi
