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

#include "ctxcsi/config.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace ctxcsi {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("config: " + msg); }

// unknown keys are errors; silent extras hide typos
void check_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || item.key() == a;
        if (!ok)
            fail("unknown key '" + item.key() + "' in " + ctx);
    }
}

double get_num(const json& j, const std::string& ctx) {
    if (!j.is_number())
        fail(ctx + " must be a number");
    return j.get<double>();
}

uint64_t get_seed(const json& j, const std::string& ctx) {
    if (!j.is_number_unsigned())
        fail(ctx + " must be an unsigned integer");
    return j.get<uint64_t>();
}

Eigen::Vector3d get_vec3(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3)
        fail(ctx + " must be an array of 3 numbers");
    return {get_num(j[0], ctx), get_num(j[1], ctx), get_num(j[2], ctx)};
}

Eigen::Vector2d get_vec2(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 2)
        fail(ctx + " must be an array of 2 numbers");
    return {get_num(j[0], ctx), get_num(j[1], ctx)};
}

void parse_scene(const json& j, SceneConfig& s) {
    check_keys(j, "scene",
               {"room_size_m", "carrier_frequency_hz", "ue_height_m", "ap_clearance_m",
                "reflection_coefficient", "blocker", "partition_walls", "aps"});
    if (j.contains("room_size_m"))
        s.room_size = get_vec3(j["room_size_m"], "scene.room_size_m");
    if (j.contains("carrier_frequency_hz"))
        s.carrier_frequency = get_num(j["carrier_frequency_hz"], "scene.carrier_frequency_hz");
    s.wavelength = SceneConfig::speed_of_light / s.carrier_frequency;
    if (j.contains("ue_height_m"))
        s.ue_height = get_num(j["ue_height_m"], "scene.ue_height_m");
    if (j.contains("ap_clearance_m"))
        s.ap_clearance = get_num(j["ap_clearance_m"], "scene.ap_clearance_m");
    if (j.contains("reflection_coefficient")) {
        const auto& rc = j["reflection_coefficient"];
        if (!rc.is_array() || rc.size() != 2)
            fail("scene.reflection_coefficient must be [re, im]");
        s.reflection_coefficient = {get_num(rc[0], "re"), get_num(rc[1], "im")};
    }
    if (j.contains("blocker")) {
        const auto& b = j["blocker"];
        check_keys(b, "scene.blocker", {"footprint_side_m", "height_m", "loss_db"});
        if (b.contains("footprint_side_m"))
            s.blocker_footprint_side = get_num(b["footprint_side_m"], "blocker.footprint_side_m");
        if (b.contains("height_m"))
            s.blocker_height = get_num(b["height_m"], "blocker.height_m");
        if (b.contains("loss_db"))
            s.blocker_loss_db = get_num(b["loss_db"], "blocker.loss_db");
    }
    if (j.contains("partition_walls")) {
        if (!j["partition_walls"].is_array())
            fail("scene.partition_walls must be an array");
        s.partition_walls.clear();
        for (const auto& w : j["partition_walls"]) {
            check_keys(w, "scene.partition_walls[]", {"from", "to", "penetration_loss_db"});
            WallSegment seg;
            if (!w.contains("from") || !w.contains("to"))
                fail("wall needs 'from' and 'to'");
            seg.a = get_vec2(w["from"], "wall.from");
            seg.b = get_vec2(w["to"], "wall.to");
            if (w.contains("penetration_loss_db"))
                seg.penetration_loss_db = get_num(w["penetration_loss_db"], "wall loss");
            s.partition_walls.push_back(seg);
        }
    }
    if (j.contains("aps")) {
        if (!j["aps"].is_array() || j["aps"].empty())
            fail("scene.aps must be a nonempty array");
        s.aps.clear();
        for (const auto& a : j["aps"]) {
            check_keys(a, "scene.aps[]",
                       {"position_m", "array_normal_azimuth_rad", "num_antennas",
                        "element_spacing_wavelengths", "tx_power"});
            ApConfig ap;
            if (!a.contains("position_m"))
                fail("AP needs position_m");
            ap.position = get_vec3(a["position_m"], "ap.position_m");
            if (a.contains("array_normal_azimuth_rad"))
                ap.array_normal_azimuth = get_num(a["array_normal_azimuth_rad"], "ap azimuth");
            if (a.contains("num_antennas"))
                ap.num_antennas = static_cast<int>(get_num(a["num_antennas"], "ap antennas"));
            if (a.contains("element_spacing_wavelengths"))
                ap.element_spacing = get_num(a["element_spacing_wavelengths"], "ap spacing");
            if (a.contains("tx_power"))
                ap.tx_power = get_num(a["tx_power"], "ap tx_power");
            s.aps.push_back(ap);
        }
    }
    s.validate();
}

void parse_train_cfg(const json& j, const std::string& ctx, TrainConfig& t) {
    check_keys(j, ctx, {"epochs", "batch_size", "learning_rate", "seed", "kl_warmup_fraction"});
    if (j.contains("epochs"))
        t.epochs = static_cast<int>(get_num(j["epochs"], ctx + ".epochs"));
    if (j.contains("batch_size"))
        t.batch_size = static_cast<int>(get_num(j["batch_size"], ctx + ".batch_size"));
    if (j.contains("learning_rate"))
        t.learning_rate = get_num(j["learning_rate"], ctx + ".learning_rate");
    if (j.contains("seed"))
        t.seed = get_seed(j["seed"], ctx + ".seed");
    if (j.contains("kl_warmup_fraction"))
        t.kl_warmup_fraction = get_num(j["kl_warmup_fraction"], ctx + ".kl_warmup_fraction");
    t.validate();
}

} // namespace

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.train_cvae_context.seed = 201;
    cfg.train_cvae_pos.seed = 202;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        fail("cannot open " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        fail(std::string("JSON parse error: ") + e.what());
    }

    RunConfig cfg = default_run_config();
    check_keys(j, "top level", {"scene", "data", "train", "eval"});

    if (j.contains("scene"))
        parse_scene(j["scene"], cfg.scene);
    else
        cfg.scene.validate();

    if (j.contains("data")) {
        const auto& d = j["data"];
        check_keys(d, "data", {"num_samples", "snr_db", "seed"});
        if (d.contains("num_samples"))
            cfg.data.num_samples = static_cast<int64_t>(get_num(d["num_samples"], "num_samples"));
        if (d.contains("snr_db"))
            cfg.data.snr_db = get_num(d["snr_db"], "snr_db");
        if (d.contains("seed"))
            cfg.data.seed = get_seed(d["seed"], "data.seed");
    }

    if (j.contains("train")) {
        const auto& t = j["train"];
        check_keys(t, "train", {"cvae_context", "cvae_pos", "cgmm"});
        if (t.contains("cvae_context"))
            parse_train_cfg(t["cvae_context"], "train.cvae_context", cfg.train_cvae_context);
        if (t.contains("cvae_pos"))
            parse_train_cfg(t["cvae_pos"], "train.cvae_pos", cfg.train_cvae_pos);
        if (t.contains("cgmm")) {
            const auto& g = t["cgmm"];
            check_keys(g, "train.cgmm", {"components", "iterations", "seed"});
            if (g.contains("components"))
                cfg.cgmm.components = static_cast<int>(get_num(g["components"], "components"));
            if (g.contains("iterations"))
                cfg.cgmm.iterations = static_cast<int>(get_num(g["iterations"], "iterations"));
            if (g.contains("seed"))
                cfg.cgmm.seed = get_seed(g["seed"], "cgmm.seed");
        }
    }

    if (j.contains("eval")) {
        const auto& e = j["eval"];
        check_keys(e, "eval", {"testset_size", "seed", "t3_region"});
        if (e.contains("testset_size"))
            cfg.eval.testset_size = static_cast<int>(get_num(e["testset_size"], "testset_size"));
        if (e.contains("seed"))
            cfg.eval.seed = get_seed(e["seed"], "eval.seed");
        if (e.contains("t3_region")) {
            const auto& r = e["t3_region"];
            if (!r.is_array() || r.size() != 4)
                fail("eval.t3_region must be [x_min, x_max, y_min, y_max]");
            cfg.eval.t3_region = {get_num(r[0], "x_min"), get_num(r[1], "x_max"),
                                  get_num(r[2], "y_min"), get_num(r[3], "y_max")};
        }
    }
    return cfg;
}

} // namespace ctxcsi
