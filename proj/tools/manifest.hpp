// manifest.hpp
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
//
// \file
// Run manifests written next to every artifact. The "config" member uses
// the same layout as a --config file, so a manifest can be fed back to the
// tool to repeat the run.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dstruct::cli {

inline constexpr const char* kToolName = "dstruct";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kCorpusFormatVersion = 1;
inline constexpr int kStatesFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

/// Lowercase hex SHA-256 of a file's bytes. Throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::ordered_json config, std::uint64_t seed);

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  /// Stamps the finish time and writes pretty JSON to `path`.
  void write(const std::filesystem::path& path);

  nlohmann::ordered_json to_json() const;

 private:
  std::string command_;
  nlohmann::ordered_json config_;
  std::uint64_t seed_;
  std::string started_at_;
  std::string finished_at_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
};

}  // namespace dstruct::cli
