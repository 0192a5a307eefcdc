// trainer.hpp
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dstruct/balance.hpp"
#include "dstruct/corpus.hpp"
#include "dstruct/evaluation.hpp"
#include "dstruct/model.hpp"
#include "dstruct/optim.hpp"
#include "json.hpp"

namespace dstruct {

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  BalanceLossKind loss = BalanceLossKind::BalanceKL;
  /// Epochs during which Greedy Balance is active when loss == GreedyBalance.
  std::size_t greedy_epochs = 3;
  /// Loss used after the greedy epochs.
  BalanceLossKind after_greedy = BalanceLossKind::None;
  AdamConfig adam;
  /// Keyword augmentation of the encoder input for the first keyword_epochs.
  std::size_t keyword_epochs = 3;
  std::size_t keyword_k = 3;
  std::uint64_t seed = 0;
  /// Gold state count for per-epoch metrics; 0 infers it from the labels.
  std::size_t n_true = 0;
  std::size_t eval_every = 1;
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> log_path;

  /// Throws ParameterError on inconsistent values.
  void validate() const;
  /// The balance loss active in a given epoch.
  BalanceLossKind loss_at(std::size_t epoch) const;
};

void to_json(nlohmann::ordered_json& j, const TrainConfig& c);
void from_json(const nlohmann::ordered_json& j, TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  double mlm = 0.0;
  double balance = 0.0;
  double total = 0.0;
  double tau = 0.0;
  std::string loss;
  std::optional<double> sed;
  std::optional<double> sce;
  /// Fraction of training pairs assigned to each state during the epoch.
  std::vector<double> usage;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  StateModel model;
  std::vector<EpochLog> log;
  /// Epoch whose parameters were written to the checkpoint.
  std::optional<std::size_t> best_epoch;
};

/// Called after every epoch with the record just logged.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Deterministic given config.seed. Throws InputError on an empty corpus and
/// NumericError (naming the batch) when a loss becomes non-finite.
TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = nullptr);

struct PredictedDialogue {
  std::string dialogue_id;
  std::vector<std::size_t> states;
  /// Set when this dialogue could not be processed; states is then empty.
  std::optional<std::string> error;
};

std::vector<PredictedDialogue> predict_states(const StateModel& model, const Corpus& corpus);

/// The first dialogue error, thrown as InputError, or the plain sequences.
StateSequences require_predictions(const std::vector<PredictedDialogue>& predictions);

/// One more than the largest gold state id.
std::size_t infer_n_true(const Corpus& corpus);

}  // namespace dstruct
