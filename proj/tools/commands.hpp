// commands.hpp
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
// Subcommands of the dstruct tool. Each one reads files, writes files and
// a manifest, and reports problems by throwing dstruct::Error.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

namespace dstruct::cli {

struct GenerateOptions {
  std::string structure = "bus";
  std::size_t n = 500;
  std::size_t min_turns = 2;
  /// 0 means unbounded (the structure needs an absorbing state).
  std::size_t max_turns = 12;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainOptions {
  std::string corpus;
  std::string loss = "balance_kl";
  double lambda = 1.0;
  /// 0 picks gold states + 2 for labeled corpora, 8 otherwise.
  std::size_t n_state = 0;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  std::size_t d_model = 32;
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t d_ff = 64;
  std::size_t max_pairs = 32;
  std::size_t max_seq_len = 512;
  double tau_start = 1.0;
  double tau_end = 0.5;
  std::string gumbel = "hard";
  std::string decoder_attention = "dialogue";
  std::size_t greedy_epochs = 3;
  std::string after_greedy = "none";
  std::size_t keyword_epochs = 3;
  std::size_t keyword_k = 3;
  std::size_t eval_every = 1;
};

struct EvalOptions {
  std::string corpus;
  /// A checkpoint, a states JSON-lines file, or "gold".
  std::string pred;
  /// 0 infers from the corpus labels.
  std::size_t n_true = 0;
  /// 0 takes the checkpoint's n_state or the largest predicted id + 1.
  std::size_t n_pred = 0;
  double epsilon = 0.0;
  bool matrices = false;
  std::string out;
};

struct BaselineOptions {
  std::string corpus;
  std::string method = "kmeans";
  std::size_t k = 0;
  std::size_t n_hidden = 0;
  std::size_t n_symbols = 0;
  std::uint64_t seed = 0;
  std::string out;
};

struct ExtractOptions {
  /// A checkpoint, a states file or "gold"; alternatively use `structure`.
  std::string pred;
  std::string corpus;
  std::string structure;
  std::size_t n_states = 0;
  double threshold = 0.15;
  std::string dot_out;
};

nlohmann::ordered_json to_json(const GenerateOptions& o);
nlohmann::ordered_json to_json(const TrainOptions& o);
nlohmann::ordered_json to_json(const EvalOptions& o);
nlohmann::ordered_json to_json(const BaselineOptions& o);
nlohmann::ordered_json to_json(const ExtractOptions& o);

void cmd_generate(const GenerateOptions& o);
void cmd_train(const TrainOptions& o);
void cmd_eval(const EvalOptions& o);
void cmd_baseline(const BaselineOptions& o);
void cmd_extract(const ExtractOptions& o);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace dstruct::cli
