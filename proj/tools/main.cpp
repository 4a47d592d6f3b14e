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

#include <CLI11.hpp>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"ctxcsi: conditional channel-statistics prediction and AP selection"};
    app.require_subcommand(1);

    std::string config, out, data, method, out_dir, in_path;
    std::string ckpt_context, ckpt_pos, ckpt_cgmm;
    std::optional<uint64_t> seed;
    int rc = 0;

    auto* gen = app.add_subcommand("gen-data", "Generate a pilot dataset (CSD1)");
    gen->add_option("--config", config, "run configuration (JSON)")->required();
    gen->add_option("--out", out, "output dataset path")->required();
    gen->add_option("--seed", seed, "override data.seed");
    gen->callback([&]() { rc = ctxcsi::cmd_gen_data(config, out, seed); });

    auto* train = app.add_subcommand("train", "Train a statistics predictor");
    train->add_option("--config", config, "run configuration (JSON)")->required();
    train->add_option("--data", data, "input dataset (CSD1)")->required();
    train->add_option("--method", method, "cvae-context | cvae-pos | cgmm")->required();
    train->add_option("--out", out, "output checkpoint path")->required();
    train->add_option("--seed", seed, "override the method's training seed");
    train->callback([&]() { rc = ctxcsi::cmd_train(config, data, method, out, seed); });

    auto* ev = app.add_subcommand("eval", "Build test sets and evaluate all methods");
    ev->add_option("--config", config, "run configuration (JSON)")->required();
    ev->add_option("--context", ckpt_context, "cvae-context checkpoint")->required();
    ev->add_option("--pos", ckpt_pos, "cvae-pos checkpoint")->required();
    ev->add_option("--cgmm", ckpt_cgmm, "cgmm checkpoint")->required();
    ev->add_option("--out-dir", out_dir, "directory for accuracy and cCDF tables")->required();
    ev->add_option("--seed", seed, "override eval.seed");
    ev->callback(
        [&]() { rc = ctxcsi::cmd_eval(config, ckpt_context, ckpt_pos, ckpt_cgmm, out_dir, seed); });

    auto* ccdf = app.add_subcommand("export-ccdf", "Complementary CDF of a value list");
    ccdf->add_option("--in", in_path, "text file of numbers")->required();
    ccdf->add_option("--out", out, "output CSV path")->required();
    ccdf->callback([&]() { rc = ctxcsi::cmd_export_ccdf(in_path, out); });

    CLI11_PARSE(app, argc, argv);
    return rc;
}
