// trainer.cc
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

#include "dstruct/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dstruct/error.hpp"
#include "dstruct/json_io.hpp"
#include "dstruct/rng.hpp"
#include "dstruct/text.hpp"

namespace dstruct {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ParameterError("train config: batch_size must be at least 1");
  if (eval_every == 0) throw ParameterError("train config: eval_every must be at least 1");
  if (keyword_epochs > 0 && keyword_k == 0)
    throw ParameterError("train config: keyword_k must be positive when keywords are on");
  if (!(model.lambda >= 0.0)) throw ParameterError("train config: lambda must be non-negative");
  if (after_greedy == BalanceLossKind::GreedyBalance)
    throw ParameterError("train config: after_greedy cannot be greedy");
  if (!(adam.lr > 0.0)) throw ParameterError("train config: learning rate must be positive");
}

BalanceLossKind TrainConfig::loss_at(std::size_t epoch) const {
  if (loss == BalanceLossKind::GreedyBalance && epoch >= greedy_epochs) return after_greedy;
  return loss;
}

void to_json(nlohmann::ordered_json& j, const TrainConfig& c) {
  j = nlohmann::ordered_json{
      {"model", c.model},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"loss", to_string(c.loss)},
      {"greedy_epochs", c.greedy_epochs},
      {"after_greedy", to_string(c.after_greedy)},
      {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
      {"keyword_epochs", c.keyword_epochs},
      {"keyword_k", c.keyword_k},
      {"seed", c.seed},
      {"n_true", c.n_true},
      {"eval_every", c.eval_every}};
}

void from_json(const nlohmann::ordered_json& j, TrainConfig& c) {
  c.model = j.at("model").get<ModelConfig>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.loss = parse_balance_loss(j.at("loss").get<std::string>());
  c.greedy_epochs = j.at("greedy_epochs").get<std::size_t>();
  c.after_greedy = parse_balance_loss(j.at("after_greedy").get<std::string>());
  const auto& a = j.at("adam");
  c.adam = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
            a.at("eps").get<double>()};
  c.keyword_epochs = j.at("keyword_epochs").get<std::size_t>();
  c.keyword_k = j.at("keyword_k").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_true = j.at("n_true").get<std::size_t>();
  c.eval_every = j.at("eval_every").get<std::size_t>();
}

nlohmann::ordered_json EpochLog::to_json() const {
  nlohmann::ordered_json j{{"epoch", epoch}, {"mlm", mlm}, {"balance", balance}};
  if (sed) j["sed"] = *sed;
  if (sce) j["sce"] = *sce;
  j["usage"] = usage;
  j["total"] = total;
  j["tau"] = tau;
  j["loss"] = loss;
  return j;
}

std::size_t infer_n_true(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& seq : corpus_gold_sequences(corpus))
    for (std::size_t s : seq) n = std::max(n, s + 1);
  return n;
}

std::vector<PredictedDialogue> predict_states(const StateModel& model, const Corpus& corpus) {
  std::vector<PredictedDialogue> out;
  out.reserve(corpus.size());
  for (const Dialogue& d : corpus) {
    PredictedDialogue p{d.id, {}, std::nullopt};
    try {
      p.states = predict_dialogue(model, d);
    } catch (const Error& e) {
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

StateSequences require_predictions(const std::vector<PredictedDialogue>& predictions) {
  StateSequences out;
  for (const PredictedDialogue& p : predictions) {
    if (p.error) throw InputError("dialogue '" + p.dialogue_id + "': " + *p.error);
    out.push_back(p.states);
  }
  return out;
}

namespace {

std::vector<PairKeywords> corpus_keywords(const Corpus& corpus, std::size_t k) {
  const TfIdfModel tfidf = TfIdfModel::fit(corpus_utterances(corpus));
  std::vector<PairKeywords> out;
  out.reserve(corpus.size());
  for (const Dialogue& d : corpus) {
    PairKeywords kw;
    for (const UtterancePair& p : d.pairs) kw.push_back(extract_keywords(tfidf, p.text(), k));
    out.push_back(std::move(kw));
  }
  return out;
}

std::string batch_diagnostic(const std::vector<Dialogue>& batch, std::size_t epoch, double mlm,
                             double balance) {
  std::string ids;
  for (const Dialogue& d : batch) ids += (ids.empty() ? "" : ",") + d.id;
  return "non-finite loss in epoch " + std::to_string(epoch) + " (mlm=" + std::to_string(mlm) +
         ", balance=" + std::to_string(balance) + ") on batch [" + ids + "]";
}

}  // namespace

TrainResult train(const Corpus& corpus, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.empty() || count_pairs(corpus) == 0) throw InputError("train: empty corpus");

  RngState rng(config.seed);
  RngState init_rng = rng.split();

  ModelConfig mc = config.model;
  Vocabulary vocab = Vocabulary::build(corpus_utterances(corpus), mc.max_pairs);
  TrainResult result{StateModel::create(mc, std::move(vocab), init_rng), {}, std::nullopt};
  StateModel& model = result.model;

  // Capacity problems surface before any training step.
  for (const Dialogue& d : corpus) build_input(d, model.vocab, model.config);

  const bool labeled = corpus_labeled(corpus);
  const std::size_t n_true = config.n_true ? config.n_true : (labeled ? infer_n_true(corpus) : 0);
  StateSequences gold;
  if (labeled) gold = corpus_gold_sequences(corpus);

  std::vector<PairKeywords> keywords;
  if (config.keyword_epochs > 0 && config.epochs > 0)
    keywords = corpus_keywords(corpus, config.keyword_k);

  std::optional<std::ofstream> log_file;
  if (config.log_path) {
    log_file.emplace(*config.log_path, std::ios::binary);
    if (!*log_file) throw IoError("cannot write training log " + config.log_path->string());
  }

  Adam adam(model.params.all(), config.adam);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_score = std::numeric_limits<double>::infinity();
  const std::size_t n_state = model.config.n_state;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double tau = model.config.tau.at(epoch, config.epochs);
    const BalanceLossKind kind = config.loss_at(epoch);
    const bool use_kw = epoch < config.keyword_epochs;
    rng.shuffle(order);

    EpochLog rec;
    rec.epoch = epoch;
    rec.tau = tau;
    rec.loss = to_string(kind);
    rec.usage.assign(n_state, 0.0);
    double mlm_sum = 0.0, bal_sum = 0.0, total_sum = 0.0;
    std::size_t n_batches = 0, n_assigned = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Dialogue> batch;
      std::vector<PairKeywords> batch_kw;
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(corpus[order[i]]);
        if (use_kw) batch_kw.push_back(keywords[order[i]]);
      }
      ForwardResult fr = forward(batch, model, tau, rng, use_kw ? &batch_kw : nullptr);
      const Tensor balance = balance_loss(kind, fr.probs);
      const Tensor total = total_loss(fr.mlm_loss, balance, model.config.lambda);
      const double mlm_v = fr.mlm_loss.item();
      const double bal_v = balance.defined() ? balance.item() : 0.0;
      const double tot_v = total.item();
      if (!std::isfinite(tot_v) || !std::isfinite(mlm_v) || !std::isfinite(bal_v))
        throw NumericError(batch_diagnostic(batch, epoch, mlm_v, bal_v));

      adam.zero_grad();
      total.backward();
      adam.step();

      mlm_sum += mlm_v;
      bal_sum += bal_v;
      total_sum += tot_v;
      ++n_batches;
      for (std::size_t s : fr.states) rec.usage[s] += 1.0;
      n_assigned += fr.states.size();
    }
    rec.mlm = mlm_sum / static_cast<double>(n_batches);
    rec.balance = bal_sum / static_cast<double>(n_batches);
    rec.total = total_sum / static_cast<double>(n_batches);
    for (double& u : rec.usage) u /= static_cast<double>(n_assigned);

    const bool do_eval = labeled && ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs);
    if (do_eval) {
      const StateSequences pred = require_predictions(predict_states(model, corpus));
      const EvaluationResult ev = evaluate(gold, pred, n_true, n_state);
      rec.sed = ev.sed;
      rec.sce = ev.sce;
    }

    if (config.checkpoint_path) {
      const bool scored = labeled ? rec.sed.has_value() : true;
      const double score = labeled ? rec.sed.value_or(0.0) : rec.total;
      if (scored && score < best_score) {
        best_score = score;
        result.best_epoch = epoch;
        save_checkpoint(model, *config.checkpoint_path);
      }
    }

    if (log_file) {
      *log_file << rec.to_json().dump() << "\n";
      log_file->flush();
    }
    if (on_epoch) on_epoch(rec);
    result.log.push_back(std::move(rec));
  }
  if (config.checkpoint_path && !result.best_epoch) save_checkpoint(model, *config.checkpoint_path);
  return result;
}

}  // namespace dstruct
