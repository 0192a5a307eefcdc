// corpus.hpp
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
// Dialogue data model, corpus/structure JSON files and the synthetic
// labeled-dialogue generator.
//
// Corpus file: a JSON array of
//   { "id": str, "turns": [ { "sys": str, "usr": str, "state": int|null } ] }
// Structure file: a JSON object
//   { "states": [str], "init": [num], "trans": [[num]],
//     "templates": [ { "sys": [str], "usr": [str] } ],
//     "slots": { name: [str] } }            ("slots" optional)
// Templates reference slots as {name}; each occurrence is filled
// independently and uniformly from the slot's list.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dstruct {

class RngState;

struct UtterancePair {
  std::string system_text;
  std::string user_text;
  std::optional<std::size_t> gold_state;

  /// System then user text, space separated.
  std::string text() const;
  bool operator==(const UtterancePair&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<UtterancePair> pairs;

  bool labeled() const { return !pairs.empty() && pairs.front().gold_state.has_value(); }
  /// Gold labels; throws InputError on an unlabeled dialogue.
  std::vector<std::size_t> gold_states() const;
  /// Throws InputError naming the dialogue when an invariant is broken.
  void validate() const;
  bool operator==(const Dialogue&) const = default;
};

using Corpus = std::vector<Dialogue>;

bool corpus_labeled(const Corpus& corpus);
std::size_t count_pairs(const Corpus& corpus);
/// Every utterance (system and user separately, empty ones skipped).
std::vector<std::string> corpus_utterances(const Corpus& corpus);
/// Gold label sequences per dialogue; throws InputError if unlabeled.
std::vector<std::vector<std::size_t>> corpus_gold_sequences(const Corpus& corpus);

Corpus parse_corpus(const std::string& json_text);
std::string corpus_to_json(const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct StateTemplates {
  std::vector<std::string> system;
  std::vector<std::string> user;
};

struct GroundTruthStructure {
  std::vector<std::string> states;
  std::vector<double> init;
  std::vector<std::vector<double>> trans;
  std::vector<StateTemplates> templates;
  std::map<std::string, std::vector<std::string>> slots;

  std::size_t size() const { return states.size(); }
  /// A state whose only successor is itself; reaching one ends a dialogue.
  bool is_absorbing(std::size_t state) const;
  bool has_absorbing() const;
  /// Throws InputError when rows are not stochastic or templates missing.
  void validate() const;
};

GroundTruthStructure parse_structure(const std::string& json_text);
std::string structure_to_json(const GroundTruthStructure& structure);
GroundTruthStructure load_structure(const std::filesystem::path& path);

/// Markov walks over `structure`: start from init, emit one pair per
/// visited state (texts drawn uniformly from that state's templates),
/// stop after an absorbing state or at max_turns. Walks shorter than
/// min_turns are redrawn. max_turns = nullopt means unbounded and needs an
/// absorbing state.
Corpus generate_synthetic(const GroundTruthStructure& structure, std::size_t n_dialogues,
                          std::size_t min_turns, std::optional<std::size_t> max_turns,
                          RngState& rng);

/// k-state cycle 0 -> 1 -> ... -> k-1 -> 0 with one fixed sentence pair per
/// state and a uniform start state.
GroundTruthStructure chain_structure(std::size_t k);

/// "bus", "weather" and "chain-2" .. "chain-8".
std::map<std::string, GroundTruthStructure> default_structures();

/// Built-in lookup; also accepts "chain-K" for any K >= 2.
std::optional<GroundTruthStructure> find_structure(const std::string& name);

}  // namespace dstruct
