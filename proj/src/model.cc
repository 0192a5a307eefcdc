// model.cc
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

#include "dstruct/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "dstruct/error.hpp"
#include "dstruct/json_io.hpp"
#include "dstruct/rng.hpp"

namespace dstruct {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host doubles as little-endian");

// ---- config ------------------------------------------------------------------

double TauSchedule::at(std::size_t epoch, std::size_t total_epochs) const {
  if (decay_per_epoch > 0.0)
    return std::max(end, start - decay_per_epoch * static_cast<double>(epoch));
  if (total_epochs <= 1) return start;
  const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return start + (end - start) * std::min(1.0, frac);
}

std::string to_string(DecoderAttention a) {
  return a == DecoderAttention::Pair ? "pair" : "dialogue";
}

DecoderAttention parse_decoder_attention(const std::string& s) {
  if (s == "dialogue") return DecoderAttention::Dialogue;
  if (s == "pair") return DecoderAttention::Pair;
  throw ParameterError("decoder attention must be dialogue or pair, got '" + s + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ParameterError("model config: " + m); };
  if (n_state < 2) fail("n_state must be at least 2");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    fail("d_model must be a positive multiple of n_heads");
  if (d_ff == 0) fail("d_ff must be positive");
  if (max_seq_len == 0) fail("max_seq_len must be positive");
  if (max_pairs == 0) fail("max_pairs must be positive");
  if (vocab_size == 0) fail("vocab_size must be positive");
  if (!(tau.start > 0.0) || !(tau.end > 0.0)) fail("tau must stay positive");
  if (tau.decay_per_epoch < 0.0) fail("tau decay must be non-negative");
  if (!(lambda >= 0.0)) fail("lambda must be non-negative");
  if (!(init_std >= 0.0)) fail("init_std must be non-negative");
}

void to_json(nlohmann::ordered_json& j, const TauSchedule& t) {
  j = nlohmann::ordered_json{{"start", t.start}, {"end", t.end}, {"decay_per_epoch", t.decay_per_epoch}};
}

void from_json(const nlohmann::ordered_json& j, TauSchedule& t) {
  t.start = j.at("start").get<double>();
  t.end = j.at("end").get<double>();
  t.decay_per_epoch = j.value("decay_per_epoch", 0.0);
}

void to_json(nlohmann::ordered_json& j, const ModelConfig& c) {
  j = nlohmann::ordered_json{{"n_state", c.n_state},
                             {"d_model", c.d_model},
                             {"n_layers", c.n_layers},
                             {"n_heads", c.n_heads},
                             {"d_ff", c.d_ff},
                             {"max_seq_len", c.max_seq_len},
                             {"max_pairs", c.max_pairs},
                             {"vocab_size", c.vocab_size},
                             {"tau", c.tau},
                             {"lambda", c.lambda},
                             {"hard_gumbel", c.hard_gumbel},
                             {"decoder_attention", to_string(c.decoder_attention)},
                             {"init_std", c.init_std}};
}

void from_json(const nlohmann::ordered_json& j, ModelConfig& c) {
  c.n_state = j.at("n_state").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.max_pairs = j.at("max_pairs").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.tau = j.at("tau").get<TauSchedule>();
  c.lambda = j.at("lambda").get<double>();
  c.hard_gumbel = j.at("hard_gumbel").get<bool>();
  c.decoder_attention =
      parse_decoder_attention(j.value("decoder_attention", std::string("dialogue")));
  c.init_std = j.at("init_std").get<double>();
}

// ---- parameters ----------------------------------------------------------------

namespace {

// Linear maps draw from N(0, 1/fan_in) so every sublayer starts as a
// non-trivial function of its input; embedding tables use init_std.
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, RngState& rng) {
  return Tensor::randn({fan_in, fan_out}, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)), true);
}

TransformerLayer init_layer(const ModelConfig& c, RngState& rng) {
  const std::size_t d = c.d_model;
  TransformerLayer l;
  l.attn.wq = init_weight(d, d, rng);
  l.attn.bq = Tensor::zeros({d}, true);
  l.attn.wk = init_weight(d, d, rng);
  l.attn.bk = Tensor::zeros({d}, true);
  l.attn.wv = init_weight(d, d, rng);
  l.attn.bv = Tensor::zeros({d}, true);
  l.attn.wo = init_weight(d, d, rng);
  l.attn.bo = Tensor::zeros({d}, true);
  l.ln1_g = Tensor::full({d}, 1.0, true);
  l.ln1_b = Tensor::zeros({d}, true);
  l.w1 = init_weight(d, c.d_ff, rng);
  l.b1 = Tensor::zeros({c.d_ff}, true);
  l.w2 = init_weight(c.d_ff, d, rng);
  l.b2 = Tensor::zeros({d}, true);
  l.ln2_g = Tensor::full({d}, 1.0, true);
  l.ln2_b = Tensor::zeros({d}, true);
  return l;
}

void append_layer(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const TransformerLayer& l) {
  out.emplace_back(prefix + ".attn.wq", l.attn.wq);
  out.emplace_back(prefix + ".attn.bq", l.attn.bq);
  out.emplace_back(prefix + ".attn.wk", l.attn.wk);
  out.emplace_back(prefix + ".attn.bk", l.attn.bk);
  out.emplace_back(prefix + ".attn.wv", l.attn.wv);
  out.emplace_back(prefix + ".attn.bv", l.attn.bv);
  out.emplace_back(prefix + ".attn.wo", l.attn.wo);
  out.emplace_back(prefix + ".attn.bo", l.attn.bo);
  out.emplace_back(prefix + ".ln1.g", l.ln1_g);
  out.emplace_back(prefix + ".ln1.b", l.ln1_b);
  out.emplace_back(prefix + ".ffn.w1", l.w1);
  out.emplace_back(prefix + ".ffn.b1", l.b1);
  out.emplace_back(prefix + ".ffn.w2", l.w2);
  out.emplace_back(prefix + ".ffn.b2", l.b2);
  out.emplace_back(prefix + ".ln2.g", l.ln2_g);
  out.emplace_back(prefix + ".ln2.b", l.ln2_b);
}

}  // namespace

Tensor TransformerLayer::forward(const Tensor& x, std::size_t n_heads,
                                 std::span<const std::size_t> blocks) const {
  const Tensor h =
      layer_norm(add(x, multi_head_self_attention(x, attn, n_heads, blocks)), ln1_g, ln1_b);
  const Tensor ff = linear(gelu(linear(h, w1, b1)), w2, b2);
  return layer_norm(add(h, ff), ln2_g, ln2_b);
}

ModelParams ModelParams::init(const ModelConfig& c, RngState& rng) {
  c.validate();
  const std::size_t d = c.d_model;
  const double s = c.init_std;
  ModelParams p;
  p.tok_emb = Tensor::randn({c.vocab_size, d}, rng, s, true);
  p.enc_pos = Tensor::randn({c.max_seq_len, d}, rng, s, true);
  p.enc_ln_g = Tensor::full({d}, 1.0, true);
  p.enc_ln_b = Tensor::zeros({d}, true);
  for (std::size_t i = 0; i < c.n_layers; ++i) p.encoder.push_back(init_layer(c, rng));
  p.state_w = init_weight(d, c.n_state, rng);
  p.state_b = Tensor::zeros({c.n_state}, true);

  p.dec_in_w = init_weight(c.n_state, d, rng);
  p.dec_in_b = Tensor::zeros({d}, true);
  p.dec_pos = Tensor::randn({c.max_seq_len, d}, rng, s, true);
  p.dec_ln_g = Tensor::full({d}, 1.0, true);
  p.dec_ln_b = Tensor::zeros({d}, true);
  for (std::size_t i = 0; i < c.n_layers; ++i) p.decoder.push_back(init_layer(c, rng));
  p.out_w = init_weight(d, c.vocab_size, rng);
  p.out_b = Tensor::zeros({c.vocab_size}, true);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("encoder.tok_emb", tok_emb);
  out.emplace_back("encoder.pos_emb", enc_pos);
  out.emplace_back("encoder.ln.g", enc_ln_g);
  out.emplace_back("encoder.ln.b", enc_ln_b);
  for (std::size_t i = 0; i < encoder.size(); ++i)
    append_layer(out, "encoder.layer" + std::to_string(i), encoder[i]);
  out.emplace_back("encoder.state_w", state_w);
  out.emplace_back("encoder.state_b", state_b);
  out.emplace_back("decoder.in_w", dec_in_w);
  out.emplace_back("decoder.in_b", dec_in_b);
  out.emplace_back("decoder.pos_emb", dec_pos);
  out.emplace_back("decoder.ln.g", dec_ln_g);
  out.emplace_back("decoder.ln.b", dec_ln_b);
  for (std::size_t i = 0; i < decoder.size(); ++i)
    append_layer(out, "decoder.layer" + std::to_string(i), decoder[i]);
  out.emplace_back("decoder.out_w", out_w);
  out.emplace_back("decoder.out_b", out_b);
  return out;
}

std::vector<Tensor> ModelParams::all() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

void ModelParams::zero_heads() {
  for (Tensor* t : {&state_w, &state_b, &out_w, &out_b}) {
    auto v = t->mutable_data();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

StateModel StateModel::create(ModelConfig config, Vocabulary vocab, RngState& rng) {
  config.vocab_size = vocab.size();
  if (config.max_pairs > vocab.n_state_tokens())
    throw ParameterError("model config: max_pairs " + std::to_string(config.max_pairs) +
                         " exceeds the " + std::to_string(vocab.n_state_tokens()) +
                         " reserved state tokens");
  ModelParams params = ModelParams::init(config, rng);
  return StateModel{config, std::move(vocab), std::move(params)};
}

// ---- forward pieces --------------------------------------------------------------

EncodedDialogue build_input(const Dialogue& dialogue, const Vocabulary& vocab,
                            const ModelConfig& config, const PairKeywords* keywords) {
  const std::size_t t = dialogue.pairs.size();
  if (t == 0) throw InputError("dialogue '" + dialogue.id + "' has no turns");
  if (t > config.max_pairs)
    throw CapacityError("dialogue '" + dialogue.id + "' has " + std::to_string(t) +
                        " pairs, model capacity is " + std::to_string(config.max_pairs));
  if (keywords && keywords->size() != t)
    throw InputError("dialogue '" + dialogue.id + "': keyword lists do not match pair count");

  EncodedDialogue enc;
  for (std::size_t i = 0; i < t; ++i) {
    const UtterancePair& pair = dialogue.pairs[i];
    const std::size_t special = i == 0 ? Vocabulary::kCls : vocab.state_token(i - 1);
    std::vector<std::size_t> body = vocab.encode(tokenize(pair.system_text));
    const std::vector<std::size_t> user = vocab.encode(tokenize(pair.user_text));
    body.insert(body.end(), user.begin(), user.end());

    std::vector<std::size_t> kw;
    if (keywords)
      for (const std::string& k : (*keywords)[i]) {
        const auto ids = vocab.encode(tokenize(k));
        kw.insert(kw.end(), ids.begin(), ids.end());
      }

    enc.special_positions.push_back(enc.tokens.size());
    enc.tokens.push_back(special);
    enc.tokens.insert(enc.tokens.end(), kw.begin(), kw.end());
    enc.tokens.insert(enc.tokens.end(), body.begin(), body.end());
    enc.tokens.push_back(Vocabulary::kSep);
    enc.spans.push_back(body.size() + kw.size() + 2);

    enc.targets.push_back(special);
    enc.targets.insert(enc.targets.end(), body.begin(), body.end());
    enc.targets.push_back(Vocabulary::kSep);
    enc.target_spans.push_back(body.size() + 2);
  }
  if (enc.tokens.size() > config.max_seq_len)
    throw CapacityError("dialogue '" + dialogue.id + "' encodes to " +
                        std::to_string(enc.tokens.size()) + " tokens, max_seq_len is " +
                        std::to_string(config.max_seq_len));
  enc.attention_mask.assign(enc.tokens.size(), true);
  return enc;
}

namespace {

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

std::vector<std::size_t> row_argmax(const Tensor& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  auto v = m.data();
  std::vector<std::size_t> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j)
      if (v[i * cols + j] > v[i * cols + best]) best = j;
    out[i] = best;
  }
  return out;
}

}  // namespace

StateAssignment encode(const EncodedDialogue& enc, const ModelParams& params,
                       const ModelConfig& config) {
  const std::size_t len = enc.length();
  if (len > config.max_seq_len)
    throw CapacityError("encoded length " + std::to_string(len) + " exceeds max_seq_len");
  const auto positions = iota_ids(len);
  Tensor x = add(embedding_lookup(params.tok_emb, enc.tokens),
                 gather_rows(params.enc_pos, positions));
  x = layer_norm(x, params.enc_ln_g, params.enc_ln_b);
  for (const TransformerLayer& layer : params.encoder) x = layer.forward(x, config.n_heads);
  // Projecting only the special rows equals projecting all L rows and
  // gathering afterwards, row for row.
  const Tensor special = gather_rows(x, enc.special_positions);
  StateAssignment a;
  a.special_logits = linear(special, params.state_w, params.state_b);
  a.probs = softmax(a.special_logits, -1);
  a.states = row_argmax(a.probs);
  return a;
}

Tensor expand_features(const StateAssignment& assignment, const EncodedDialogue& enc) {
  const std::size_t covered =
      std::accumulate(enc.target_spans.begin(), enc.target_spans.end(), std::size_t{0});
  if (covered != enc.targets.size() || enc.target_spans.size() != assignment.special_logits.rows())
    throw InputError("expand_features: pair spans cover " + std::to_string(covered) + " of " +
                     std::to_string(enc.targets.size()) + " positions for " +
                     std::to_string(assignment.special_logits.rows()) + " pairs");
  return repeat_rows(assignment.special_logits, enc.target_spans);
}

Tensor decoder_logits(const Tensor& phi_tilde, std::span<const double> gumbel_noise, double tau,
                      const ModelParams& params, const ModelConfig& config,
                      std::span<const std::size_t> pair_spans) {
  const std::size_t len = phi_tilde.rows();
  const bool scoped = config.decoder_attention == DecoderAttention::Pair;
  if (scoped && pair_spans.empty())
    throw InputError("decoder_logits: pair-scoped attention needs pair spans");
  if (len > config.max_seq_len)
    throw CapacityError("decoder length " + std::to_string(len) + " exceeds max_seq_len");
  const Tensor p_tilde = gumbel_softmax_with_noise(phi_tilde, gumbel_noise, tau, config.hard_gumbel);
  Tensor x = add(linear(p_tilde, params.dec_in_w, params.dec_in_b),
                 gather_rows(params.dec_pos, iota_ids(len)));
  x = layer_norm(x, params.dec_ln_g, params.dec_ln_b);
  const std::span<const std::size_t> blocks =
      scoped ? pair_spans : std::span<const std::size_t>{};
  for (const TransformerLayer& layer : params.decoder) x = layer.forward(x, config.n_heads, blocks);
  return linear(x, params.out_w, params.out_b);
}

Tensor decode_and_mlm_loss_with_noise(const Tensor& phi_tilde, const EncodedDialogue& enc,
                                      std::span<const double> gumbel_noise,
                                      const ModelParams& params, const ModelConfig& config,
                                      double tau, Reduction reduction) {
  if (!(tau > 0.0)) throw ParameterError("decode: tau must be positive");
  const Tensor logits =
      decoder_logits(phi_tilde, gumbel_noise, tau, params, config, enc.target_spans);
  return cross_entropy(logits, enc.targets, Vocabulary::kPad, reduction);
}

Tensor decode_and_mlm_loss(const Tensor& phi_tilde, const EncodedDialogue& enc,
                           const ModelParams& params, const ModelConfig& config, double tau,
                           RngState& rng, Reduction reduction) {
  if (!(tau > 0.0)) throw ParameterError("decode: tau must be positive");
  const std::vector<double> noise = sample_gumbel(phi_tilde.shape(), rng);
  return decode_and_mlm_loss_with_noise(phi_tilde, enc, noise, params, config, tau, reduction);
}

ForwardResult forward(std::span<const Dialogue> batch, const StateModel& model, double tau,
                      RngState& rng, const std::vector<PairKeywords>* keywords) {
  if (batch.empty()) throw InputError("forward: empty batch");
  if (keywords && keywords->size() != batch.size())
    throw InputError("forward: keyword lists do not match batch size");
  ForwardResult r;
  std::vector<Tensor> probs;
  Tensor loss_sum;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const EncodedDialogue enc =
        build_input(batch[b], model.vocab, model.config, keywords ? &(*keywords)[b] : nullptr);
    StateAssignment a = encode(enc, model.params, model.config);
    const Tensor phi_tilde = expand_features(a, enc);
    const Tensor l =
        decode_and_mlm_loss(phi_tilde, enc, model.params, model.config, tau, rng, Reduction::Sum);
    loss_sum = loss_sum.defined() ? add(loss_sum, l) : l;
    for (std::size_t t : enc.targets) r.n_tokens += t != Vocabulary::kPad;
    r.pair_counts.push_back(enc.n_pairs());
    r.states.insert(r.states.end(), a.states.begin(), a.states.end());
    probs.push_back(std::move(a.probs));
  }
  r.probs = probs.size() == 1 ? probs[0] : concat_rows(probs);
  r.mlm_loss = scale(loss_sum, r.n_tokens ? 1.0 / static_cast<double>(r.n_tokens) : 0.0);
  return r;
}

std::vector<std::size_t> predict_dialogue(const StateModel& model, const Dialogue& dialogue) {
  NoGradGuard no_grad;
  const EncodedDialogue enc = build_input(dialogue, model.vocab, model.config);
  return encode(enc, model.params, model.config).states;
}

// ---- checkpoints -------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const StateModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format"] = "dstruct-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = model.config;
  header["vocabulary"] = model.vocab.tokens();
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  const auto named = model.params.named();
  for (const auto& [name, t] : named) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : named)
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

bool is_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  return in && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0;
}

StateModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("checkpoint: bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto header_len = read_pod<std::uint64_t>(in, "header length");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError("checkpoint: truncated header");

  nlohmann::ordered_json header;
  ModelConfig config;
  std::vector<std::string> tokens;
  try {
    header = nlohmann::ordered_json::parse(text);
    config = header.at("config").get<ModelConfig>();
    tokens = header.at("vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));
  if (vocab.size() != config.vocab_size)
    throw ParseError("checkpoint: vocabulary size disagrees with config");

  RngState unused(0);
  ModelConfig shell = config;
  shell.init_std = 0.0;
  ModelParams params = ModelParams::init(shell, unused);
  auto named = params.named();
  const auto& listed = header.at("tensors");
  if (listed.size() != named.size()) throw ParseError("checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, t] = named[i];
    if (listed[i].at("name").get<std::string>() != name ||
        listed[i].at("shape").get<Shape>() != t.shape())
      throw ParseError("checkpoint: tensor " + std::to_string(i) + " is not " + name + " " +
                       shape_string(t.shape()));
    auto dst = t.mutable_data();
    in.read(reinterpret_cast<char*>(dst.data()),
            static_cast<std::streamsize>(dst.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint: truncated tensor " + name);
  }
  return StateModel{config, std::move(vocab), std::move(params)};
}

}  // namespace dstruct
