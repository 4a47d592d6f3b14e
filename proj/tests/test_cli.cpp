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
#include "ctxcsi/config.hpp"

#include <cstdlib>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

using namespace ctxcsi;
namespace fs = std::filesystem;

namespace {

const char* tiny_config_json = R"({
  "scene": {
    "aps": [
      {"position_m": [10.0, 5.0, 2.4], "array_normal_azimuth_rad": 3.141592653589793,
       "num_antennas": 4},
      {"position_m": [0.0, 5.0, 2.4], "array_normal_azimuth_rad": 0.0, "num_antennas": 4}
    ]
  },
  "data": {"num_samples": 200, "snr_db": 10.0, "seed": 11},
  "train": {
    "cvae_context": {"epochs": 2, "batch_size": 32, "learning_rate": 0.002, "seed": 21},
    "cvae_pos": {"epochs": 2, "batch_size": 32, "learning_rate": 0.002, "seed": 22},
    "cgmm": {"components": 4, "iterations": 10, "seed": 23}
  },
  "eval": {"testset_size": 30, "seed": 31}
})";

struct CliEnv {
    fs::path dir;
    std::string cli = CTXCSI_CLI_PATH;

    CliEnv() {
        dir = fs::temp_directory_path() / "ctxcsi_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "config.json") << tiny_config_json;
    }
    ~CliEnv() { fs::remove_all(dir); }

    int run(const std::string& args) const {
        const std::string cmd = cli + " " + args + " > " + (dir / "stdout.log").string() +
                                " 2> " + (dir / "stderr.log").string();
        const int ret = std::system(cmd.c_str());
        return WIFEXITED(ret) ? WEXITSTATUS(ret) : -1;
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    std::string bytes(const std::string& name) const {
        std::ifstream is(dir / name, std::ios::binary);
        return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    }
};

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("cli: full pipeline on a tiny configuration") {
    CliEnv env;
    const std::string cfg = " --config " + env.path("config.json");

    SUBCASE("gen-data writes a deterministic CSD1 file") {
        CHECK(env.run("gen-data" + cfg + " --out " + env.path("a.csd1")) == 0);
        CHECK(env.run("gen-data" + cfg + " --out " + env.path("b.csd1")) == 0);
        const std::string a = env.bytes("a.csd1");
        CHECK(a.size() > 16);
        CHECK(a.compare(0, 4, "CSD1") == 0);
        CHECK(a == env.bytes("b.csd1"));

        // a different seed changes the bytes
        CHECK(env.run("gen-data" + cfg + " --out " + env.path("c.csd1") + " --seed 999") == 0);
        CHECK(a != env.bytes("c.csd1"));
    }

    SUBCASE("gen-data rejects a bad config") {
        std::ofstream(env.dir / "bad.json") << R"({"data": {"num_samples": 0}})";
        CHECK(env.run("gen-data --config " + env.path("bad.json") + " --out " +
                      env.path("x.csd1")) == 1);
        std::ofstream(env.dir / "unknown.json") << R"({"data": {"sample_count": 10}})";
        CHECK(env.run("gen-data --config " + env.path("unknown.json") + " --out " +
                      env.path("x.csd1")) == 1);
        CHECK(env.run("gen-data --config " + env.path("missing.json") + " --out " +
                      env.path("x.csd1")) == 1);
    }

    SUBCASE("train, eval and export run end to end") {
        REQUIRE(env.run("gen-data" + cfg + " --out " + env.path("data.csd1")) == 0);

        CHECK(env.run("train" + cfg + " --data " + env.path("data.csd1") +
                      " --method cvae-context --out " + env.path("ctx.ckp1")) == 0);
        CHECK(env.run("train" + cfg + " --data " + env.path("data.csd1") +
                      " --method cvae-pos --out " + env.path("pos.ckp1")) == 0);
        CHECK(env.run("train" + cfg + " --data " + env.path("data.csd1") +
                      " --method cgmm --out " + env.path("gmm.ckp1")) == 0);
        CHECK(env.run("train" + cfg + " --data " + env.path("data.csd1") +
                      " --method nonsense --out " + env.path("no.ckp1")) == 1);

        // checkpoint container round trip is byte-stable
        const Checkpoint ck = read_checkpoint(env.path("ctx.ckp1"));
        CHECK(ck.method == "cvae-context");
        write_checkpoint(ck, env.path("ctx2.ckp1"));
        CHECK(env.bytes("ctx.ckp1") == env.bytes("ctx2.ckp1"));

        // reloading reproduces identical predictions on probe contexts
        const RunConfig rc = load_run_config(env.path("config.json"));
        const std::string hash = rc.scene.hash();
        const auto models_a = cvae_from_checkpoint(ck, hash);
        const auto models_b = cvae_from_checkpoint(read_checkpoint(env.path("ctx.ckp1")), hash);
        REQUIRE(models_a.size() == 2);
        Rng rng(5);
        for (int probe = 0; probe < 10; ++probe) {
            ContextVector c;
            c.ue_xy = {rng.uniform(0, 10), rng.uniform(0, 10)};
            c.blocker_xy = {rng.uniform(0, 10), rng.uniform(0, 10)};
            for (int s = 0; s < 2; ++s) {
                const auto sa = predict_stats_context(models_a[s], c);
                const auto sb = predict_stats_context(models_b[s], c);
                CHECK(sa.spectrum == sb.spectrum);
            }
        }

        // position-only variant consumes a two-entry context
        const auto pos_models =
            cvae_from_checkpoint(read_checkpoint(env.path("pos.ckp1")), hash);
        CHECK(pos_models[0].context_dim() == 2);
        CHECK(pos_models[0].encode(ContextVector{{1.0, 2.0}, {3.0, 4.0}}).size() == 2 * 2 * 8);

        // eval requires every checkpoint
        CHECK(env.run("eval" + cfg + " --context " + env.path("nope.ckp1") + " --pos " +
                      env.path("pos.ckp1") + " --cgmm " + env.path("gmm.ckp1") + " --out-dir " +
                      env.path("out")) == 1);

        REQUIRE(env.run("eval" + cfg + " --context " + env.path("ctx.ckp1") + " --pos " +
                        env.path("pos.ckp1") + " --cgmm " + env.path("gmm.ckp1") + " --out-dir " +
                        env.path("out")) == 0);
        const std::string acc = env.bytes("out/accuracy.csv");
        CHECK(count_lines(acc) == 6); // header plus five methods
        CHECK(acc.find("cvae-context,") != std::string::npos);
        CHECK(acc.find("geo-los,") != std::string::npos);
        for (const char* set : {"t1", "t2", "t3"})
            for (const char* method : {"cvae-context", "cvae-pos", "cvae-csi", "cgmm", "geo-los"})
                CHECK(fs::exists(env.dir / "out" /
                                 ("ccdf_" + std::string(set) + "_" + method + ".csv")));

        // identical rerun
        REQUIRE(env.run("eval" + cfg + " --context " + env.path("ctx.ckp1") + " --pos " +
                        env.path("pos.ckp1") + " --cgmm " + env.path("gmm.ckp1") + " --out-dir " +
                        env.path("out2")) == 0);
        CHECK(env.bytes("out/accuracy.csv") == env.bytes("out2/accuracy.csv"));
        CHECK(env.bytes("out/ccdf_t2_cvae-context.csv") ==
              env.bytes("out2/ccdf_t2_cvae-context.csv"));
    }

    SUBCASE("export-ccdf") {
        std::ofstream(env.dir / "values.txt") << "0.5 1.0\n";
        CHECK(env.run("export-ccdf --in " + env.path("values.txt") + " --out " +
                      env.path("ccdf.csv")) == 0);
        CHECK(env.bytes("ccdf.csv") == "threshold,fraction\n0.5,1\n1,0.5\n");
        std::ofstream(env.dir / "junk.txt") << "1.0 banana\n";
        CHECK(env.run("export-ccdf --in " + env.path("junk.txt") + " --out " +
                      env.path("ccdf2.csv")) == 1);
    }
}

TEST_CASE("cli: checkpoint scene-hash guard") {
    CliEnv env;
    const std::string cfg = " --config " + env.path("config.json");
    REQUIRE(env.run("gen-data" + cfg + " --out " + env.path("data.csd1")) == 0);
    REQUIRE(env.run("train" + cfg + " --data " + env.path("data.csd1") +
                    " --method cgmm --out " + env.path("gmm.ckp1")) == 0);
    const RunConfig rc = load_run_config(env.path("config.json"));
    CHECK_NOTHROW(cgmm_from_checkpoint(read_checkpoint(env.path("gmm.ckp1")), rc.scene.hash()));
    CHECK_THROWS_AS(cgmm_from_checkpoint(read_checkpoint(env.path("gmm.ckp1")), "deadbeef"),
                    std::runtime_error);
}
