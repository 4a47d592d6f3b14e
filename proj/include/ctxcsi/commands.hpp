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

#ifndef CTXCSI_COMMANDS_HPP
#define CTXCSI_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace ctxcsi {

// Exit codes: 0 success, 1 bad configuration or missing inputs, 2 write
// failure, 3 training aborted on non-finite loss.

int cmd_gen_data(const std::string& config_path, const std::string& out_path,
                 std::optional<uint64_t> seed_override);

// method is one of cvae-context | cvae-pos | cgmm
int cmd_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& method, const std::string& out_checkpoint,
              std::optional<uint64_t> seed_override);

int cmd_eval(const std::string& config_path, const std::string& ckpt_context,
             const std::string& ckpt_pos, const std::string& ckpt_cgmm, const std::string& out_dir,
             std::optional<uint64_t> seed_override);

int cmd_export_ccdf(const std::string& values_path, const std::string& out_path);

} // namespace ctxcsi

#endif
