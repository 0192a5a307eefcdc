// baselines.hpp
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
// Reference structure learners. K-Means clusters tf-idf pair vectors; the
// HMM treats those cluster ids as its discrete observations.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dstruct/corpus.hpp"
#include "dstruct/evaluation.hpp"
#include "dstruct/text.hpp"

namespace dstruct {

class RngState;

/// One L2-normalized tf-idf row per utterance pair, dialogues in order.
/// Pairs without known terms stay zero.
Matrix vectorize_pairs(const Corpus& corpus, const TfIdfModel& tfidf);

struct KMeansModel {
  Matrix centroids;
  /// Inertia after each assignment step.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;

  std::size_t k() const { return centroids.size(); }
  std::size_t dim() const { return centroids.empty() ? 0 : centroids[0].size(); }
};

/// k-means++ seeding (or the given centroids), then Lloyd iterations until
/// the assignment stops changing or max_iters. Empty clusters are reseeded
/// at the point farthest from its centroid. Throws ParameterError when k
/// exceeds the number of distinct points.
KMeansModel kmeans_fit(const Matrix& x, std::size_t k, RngState& rng, std::size_t max_iters = 100,
                       const std::optional<Matrix>& initial_centroids = std::nullopt);
/// Nearest centroid per row, ties to the lowest index.
std::vector<std::size_t> kmeans_assign(const KMeansModel& model, const Matrix& x);
double kmeans_inertia(const KMeansModel& model, const Matrix& x);

struct HmmModel {
  std::vector<double> pi;
  Matrix a;  // n_hidden x n_hidden
  Matrix b;  // n_hidden x n_symbols

  std::size_t n_hidden() const { return pi.size(); }
  std::size_t n_symbols() const { return b.empty() ? 0 : b[0].size(); }
  /// Throws InputError unless pi, A and B are row-stochastic within 1e-9.
  void validate() const;
};

struct HmmFitResult {
  HmmModel model;
  /// Data log-likelihood before each EM update, plus the final model's.
  std::vector<double> log_likelihood;
};

/// Scaled forward-backward log-likelihood of one sequence.
double hmm_log_likelihood(const HmmModel& model, const std::vector<std::size_t>& seq);

/// Baum-Welch from a random start. Stops when the log-likelihood gain is
/// below tol or after max_iters updates. Throws InputError when there is no
/// observation or a symbol is >= n_symbols.
HmmFitResult hmm_fit(const StateSequences& observations, std::size_t n_hidden,
                     std::size_t n_symbols, RngState& rng, std::size_t max_iters = 200,
                     double tol = 1e-6, const std::optional<HmmModel>& init = std::nullopt);

struct HmmDecodeResult {
  std::vector<std::size_t> states;
  /// Some symbol was outside the emission alphabet and scored uniformly.
  bool unseen_symbol = false;
};

/// Log-space Viterbi; ties prefer the lowest state index.
HmmDecodeResult hmm_decode(const HmmModel& model, const std::vector<std::size_t>& seq);

/// Draws a state path and its observations.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> hmm_sample(const HmmModel& model,
                                                                          std::size_t length,
                                                                          RngState& rng);

/// Per-dialogue K-Means cluster ids over tf-idf pair vectors.
StateSequences kmeans_baseline(const Corpus& corpus, std::size_t k, RngState& rng,
                               std::size_t max_iters = 100);

/// HMM over K-Means symbols. n_symbols == 0 picks 2 * n_hidden, capped at
/// the number of distinct pair vectors.
StateSequences hmm_baseline(const Corpus& corpus, std::size_t n_hidden, RngState& rng,
                            std::size_t n_symbols = 0, std::size_t max_iters = 200);

}  // namespace dstruct
