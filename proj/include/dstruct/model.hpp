// model.hpp
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
// Encoder-decoder latent state model.
//
// A dialogue is flattened into one token sequence
//   [CLS] s1 u1 [SEP] [STATE_0] s2 u2 [SEP] ... [STATE_{t-2}] st ut [SEP]
// and run through a transformer encoder. The output rows at the t special
// positions are projected to n_state logits; their softmax is the state
// distribution of each utterance pair and the argmax its state.
//
// For reconstruction each pair's logit row is copied to every position of
// that pair, passed through Gumbel-Softmax, mapped affinely to the decoder
// width and decoded by a second transformer that sees only these features
// plus position embeddings. The decoder predicts every original token; the
// mean cross-entropy is the reconstruction (MLM) loss.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dstruct/corpus.hpp"
#include "dstruct/ops.hpp"
#include "dstruct/tensor.hpp"
#include "dstruct/text.hpp"

namespace dstruct {

class RngState;

/// Gumbel temperature per epoch. With decay_per_epoch == 0 the temperature
/// is annealed linearly from start to end over the run; otherwise it drops
/// by decay_per_epoch each epoch and is floored at end.
struct TauSchedule {
  double start = 1.0;
  double end = 0.5;
  double decay_per_epoch = 0.0;

  double at(std::size_t epoch, std::size_t total_epochs) const;

  bool operator==(const TauSchedule&) const = default;
};

/// Which positions a decoder row may attend to.
enum class DecoderAttention { Dialogue, Pair };

std::string to_string(DecoderAttention a);
/// Accepts "dialogue" or "pair"; throws ParameterError otherwise.
DecoderAttention parse_decoder_attention(const std::string& s);

struct ModelConfig {
  std::size_t n_state = 8;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 256;
  std::size_t max_seq_len = 256;
  std::size_t max_pairs = 32;
  std::size_t vocab_size = 0;
  TauSchedule tau;
  double lambda = 1.0;
  bool hard_gumbel = true;
  DecoderAttention decoder_attention = DecoderAttention::Dialogue;
  /// Standard deviation of the embedding tables.
  double init_std = 0.02;

  /// Throws ParameterError on an inconsistent configuration.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct EncodedDialogue {
  /// Encoder input ids (keywords included when given).
  std::vector<std::size_t> tokens;
  /// Index in `tokens` of each pair's [CLS]/[STATE_i] token.
  std::vector<std::size_t> special_positions;
  /// Encoder tokens per pair: special + keywords + utterances + [SEP].
  std::vector<std::size_t> spans;
  /// Decoder reconstruction targets: the same layout without keywords.
  std::vector<std::size_t> targets;
  /// Decoder positions per pair; these drive feature expansion.
  std::vector<std::size_t> target_spans;
  /// All true: dialogues are never padded.
  std::vector<bool> attention_mask;

  std::size_t length() const { return tokens.size(); }
  std::size_t n_pairs() const { return special_positions.size(); }
};

struct StateAssignment {
  Tensor probs;                     // t x n_state, rows sum to 1
  std::vector<std::size_t> states;  // row argmax, ties to lowest index
  Tensor special_logits;            // t x n_state, pre-softmax
};

struct TransformerLayer {
  AttentionWeights attn;
  Tensor ln1_g, ln1_b;
  Tensor w1, b1, w2, b2;
  Tensor ln2_g, ln2_b;

  /// Post-norm block: x = LN(x + MHA(x)); x = LN(x + FFN(x)).
  Tensor forward(const Tensor& x, std::size_t n_heads,
                 std::span<const std::size_t> blocks = {}) const;
};

struct ModelParams {
  Tensor tok_emb, enc_pos, enc_ln_g, enc_ln_b;
  std::vector<TransformerLayer> encoder;
  Tensor state_w, state_b;

  Tensor dec_in_w, dec_in_b, dec_pos, dec_ln_g, dec_ln_b;
  std::vector<TransformerLayer> decoder;
  Tensor out_w, out_b;

  static ModelParams init(const ModelConfig& config, RngState& rng);
  /// Every parameter with a stable dotted name, in a fixed order.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> all() const;
  /// Sets the state projection and the vocabulary projection to zero.
  void zero_heads();
};

/// Config, vocabulary and parameters: everything a checkpoint holds.
struct StateModel {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;

  static StateModel create(ModelConfig config, Vocabulary vocab, RngState& rng);
};

using PairKeywords = std::vector<std::vector<std::string>>;

EncodedDialogue build_input(const Dialogue& dialogue, const Vocabulary& vocab,
                            const ModelConfig& config, const PairKeywords* keywords = nullptr);

StateAssignment encode(const EncodedDialogue& enc, const ModelParams& params,
                       const ModelConfig& config);

/// Each pair's logit row repeated over that pair's decoder positions.
Tensor expand_features(const StateAssignment& assignment, const EncodedDialogue& enc);

/// Vocabulary logits reconstructed from expanded state features only.
/// `pair_spans` is required for pair-scoped decoder attention.
Tensor decoder_logits(const Tensor& phi_tilde, std::span<const double> gumbel_noise, double tau,
                      const ModelParams& params, const ModelConfig& config,
                      std::span<const std::size_t> pair_spans = {});

/// Cross-entropy of the reconstruction against enc.targets, [PAD] excluded.
Tensor decode_and_mlm_loss(const Tensor& phi_tilde, const EncodedDialogue& enc,
                           const ModelParams& params, const ModelConfig& config, double tau,
                           RngState& rng, Reduction reduction = Reduction::Mean);
/// Same with explicit noise (gradient checks, bottleneck tests).
Tensor decode_and_mlm_loss_with_noise(const Tensor& phi_tilde, const EncodedDialogue& enc,
                                      std::span<const double> gumbel_noise,
                                      const ModelParams& params, const ModelConfig& config,
                                      double tau, Reduction reduction = Reduction::Mean);

struct ForwardResult {
  Tensor probs;                          // U x n_state, dialogues stacked in batch order
  std::vector<std::size_t> states;       // length U
  std::vector<std::size_t> pair_counts;  // pairs per dialogue
  Tensor mlm_loss;                       // mean over all reconstructed tokens
  std::size_t n_tokens = 0;
};

/// Batch forward pass. `keywords`, when given, holds one PairKeywords per
/// dialogue for encoder-side augmentation.
ForwardResult forward(std::span<const Dialogue> batch, const StateModel& model, double tau,
                      RngState& rng, const std::vector<PairKeywords>* keywords = nullptr);

/// Deterministic state assignment (no Gumbel noise, no graph).
std::vector<std::size_t> predict_dialogue(const StateModel& model, const Dialogue& dialogue);

/// Binary checkpoint: magic, version, JSON header (config, vocabulary,
/// parameter names and shapes), then raw little-endian doubles.
void save_checkpoint(const StateModel& model, const std::filesystem::path& path);
StateModel load_checkpoint(const std::filesystem::path& path);
/// True if the file starts with the checkpoint magic.
bool is_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace dstruct
