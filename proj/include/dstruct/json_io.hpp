// json_io.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON mappings for configuration structs (checkpoint headers, manifests).

#pragma once

#include "dstruct/model.hpp"
#include "json.hpp"

namespace dstruct {

void to_json(nlohmann::ordered_json& j, const TauSchedule& t);
void from_json(const nlohmann::ordered_json& j, TauSchedule& t);
void to_json(nlohmann::ordered_json& j, const ModelConfig& c);
void from_json(const nlohmann::ordered_json& j, ModelConfig& c);

}  // namespace dstruct
