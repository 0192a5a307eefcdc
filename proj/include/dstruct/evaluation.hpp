// evaluation.hpp
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
// Structure metrics: bigram transition estimates, gold/predicted mapping
// matrices, projection of a predicted structure into gold-state space, the
// Euclidean (SED) and cross-entropy (SCE) distances between structures, and
// graph extraction with DOT export.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace dstruct {

using Matrix = std::vector<std::vector<double>>;
using StateSequences = std::vector<std::vector<std::size_t>>;

/// Lower clamp for transition probabilities inside the SCE logarithm.
inline constexpr double kSceFloor = 1e-12;

struct TransitionMatrix {
  std::size_t n = 0;
  Matrix probs;
  Matrix counts;
  /// Rows with no outgoing bigrams (and epsilon == 0); set to uniform.
  std::vector<bool> uniform_rows;
  /// Rows whose sum is off 1 by more than 1e-9 (projections only).
  std::vector<bool> non_stochastic_rows;

  static TransitionMatrix from_probs(Matrix probs);
};

struct MappingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Matrix probs;
  /// Source states that never occur; their rows are uniform.
  std::vector<bool> unoccupied;
};

enum class MappingDirection { GoldToPred, PredToGold };

/// Throws InputError for ids >= n or negative epsilon.
TransitionMatrix estimate_transition(const StateSequences& sequences, std::size_t n,
                                     double epsilon = 0.0);

/// Throws InputError on length mismatch or out-of-range labels.
MappingMatrix mapping_matrix(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                             std::size_t n_gold, std::size_t n_pred, MappingDirection direction);

/// P_gold_pred * T_pred * P_pred_gold as the literal double sum. Rows are
/// not renormalized; off-stochastic rows are flagged.
TransitionMatrix project_transition(const TransitionMatrix& t_pred,
                                    const MappingMatrix& gold_to_pred,
                                    const MappingMatrix& pred_to_gold);

double sed(const TransitionMatrix& t_true, const TransitionMatrix& t_proj);

struct SceResult {
  double value = 0.0;
  bool clamped = false;
};
SceResult sce(const TransitionMatrix& t_true, const TransitionMatrix& t_proj,
              double epsilon = kSceFloor);

struct EvaluationResult {
  double sed = 0.0;
  double sce = 0.0;
  bool clamped = false;
  std::size_t n_true = 0;
  std::size_t n_pred = 0;
  TransitionMatrix t_true;
  TransitionMatrix t_pred;
  TransitionMatrix t_proj;
  MappingMatrix gold_to_pred;
  MappingMatrix pred_to_gold;
};

/// Sequences are aligned dialogue for dialogue and pair for pair.
EvaluationResult evaluate(const StateSequences& gold, const StateSequences& pred,
                          std::size_t n_true, std::size_t n_pred, double epsilon = 0.0,
                          double sce_epsilon = kSceFloor);

/// Report JSON {sed, sce, n_true, n_pred, clamped} plus matrices on request.
nlohmann::ordered_json report_json(const EvaluationResult& r, bool with_matrices);

struct GraphNode {
  std::size_t id = 0;
  std::string label;
  double occupancy = 0.0;
};

struct GraphEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double prob = 0.0;
};

struct StructureGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
};

/// Nodes are occupied states (per `occupancy`, or every state when absent)
/// plus every edge endpoint. Rows flagged uniform emit no edges. Throws
/// ParameterError unless 0 <= threshold < 1.
StructureGraph extract_structure(const TransitionMatrix& t,
                                 const std::vector<std::string>& labels, double threshold,
                                 const std::optional<std::vector<double>>& occupancy = std::nullopt);

std::string export_dot(const StructureGraph& graph);

/// Per-state share of all positions in `sequences`.
std::vector<double> state_occupancy(const StateSequences& sequences, std::size_t n);

struct StateRecord {
  std::string dialogue_id;
  std::vector<std::size_t> states;
};

/// JSON-lines: one {"dialogue_id": ..., "states": [...]} object per line.
std::string states_to_jsonl(const std::vector<StateRecord>& records);
std::vector<StateRecord> parse_states_jsonl(const std::string& text);
std::vector<StateRecord> load_states(const std::filesystem::path& path);
void save_states(const std::vector<StateRecord>& records, const std::filesystem::path& path);

}  // namespace dstruct
