// commands.cc
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

#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "dstruct/baselines.hpp"
#include "dstruct/corpus.hpp"
#include "dstruct/error.hpp"
#include "dstruct/evaluation.hpp"
#include "dstruct/model.hpp"
#include "dstruct/rng.hpp"
#include "dstruct/trainer.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace dstruct::cli {

namespace {

const char* kBuiltinList = "bus, weather, chain-K (K >= 2)";

GroundTruthStructure resolve_structure(const std::string& name) {
  if (auto s = find_structure(name)) return *s;
  if (fs::is_regular_file(name)) return load_structure(name);
  throw InputError("unknown structure '" + name + "'; built-ins are " + kBuiltinList +
                   ", or pass a structure JSON file");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path manifest_path(const fs::path& artifact) {
  return fs::path(artifact.string() + ".manifest.json");
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// Predicted sequences for the dialogues of `corpus`, in corpus order.
struct Predictions {
  StateSequences sequences;
  std::size_t n_states = 0;
};

Predictions load_predictions(const std::string& pred, const Corpus& corpus,
                             RunManifest& manifest) {
  Predictions p;
  if (pred == "gold") {
    p.sequences = corpus_gold_sequences(corpus);
    p.n_states = infer_n_true(corpus);
    return p;
  }
  manifest.add_input(pred);
  if (is_checkpoint(pred)) {
    const StateModel model = load_checkpoint(pred);
    p.sequences = require_predictions(predict_states(model, corpus));
    p.n_states = model.config.n_state;
    return p;
  }
  std::map<std::string, std::vector<std::size_t>> by_id;
  for (StateRecord& r : load_states(pred)) {
    if (!by_id.emplace(r.dialogue_id, std::move(r.states)).second)
      throw InputError("states file lists dialogue '" + r.dialogue_id + "' twice");
  }
  for (const Dialogue& d : corpus) {
    auto it = by_id.find(d.id);
    if (it == by_id.end()) throw InputError("states file has no entry for dialogue '" + d.id + "'");
    if (it->second.size() != d.pairs.size())
      throw InputError("dialogue '" + d.id + "' has " + std::to_string(d.pairs.size()) +
                       " pairs but " + std::to_string(it->second.size()) + " predicted states");
    for (std::size_t s : it->second) p.n_states = std::max(p.n_states, s + 1);
    p.sequences.push_back(it->second);
  }
  return p;
}

std::vector<StateRecord> to_records(const Corpus& corpus, const StateSequences& seqs) {
  std::vector<StateRecord> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) out.push_back({corpus[i].id, seqs[i]});
  return out;
}

}  // namespace

ojson to_json(const GenerateOptions& o) {
  return ojson{{"structure", o.structure}, {"n", o.n},       {"min-turns", o.min_turns},
               {"max-turns", o.max_turns}, {"seed", o.seed}, {"out", o.out}};
}

ojson to_json(const TrainOptions& o) {
  return ojson{{"corpus", o.corpus},
               {"loss", o.loss},
               {"lambda", o.lambda},
               {"n-state", o.n_state},
               {"epochs", o.epochs},
               {"seed", o.seed},
               {"out-dir", o.out_dir},
               {"batch-size", o.batch_size},
               {"lr", o.lr},
               {"d-model", o.d_model},
               {"layers", o.layers},
               {"heads", o.heads},
               {"d-ff", o.d_ff},
               {"max-pairs", o.max_pairs},
               {"max-seq-len", o.max_seq_len},
               {"tau-start", o.tau_start},
               {"tau-end", o.tau_end},
               {"gumbel", o.gumbel},
               {"decoder-attention", o.decoder_attention},
               {"greedy-epochs", o.greedy_epochs},
               {"after-greedy", o.after_greedy},
               {"keyword-epochs", o.keyword_epochs},
               {"keyword-k", o.keyword_k},
               {"eval-every", o.eval_every}};
}

ojson to_json(const EvalOptions& o) {
  return ojson{{"corpus", o.corpus},   {"pred", o.pred},         {"n-true", o.n_true},
               {"n-pred", o.n_pred},   {"epsilon", o.epsilon},   {"matrices", o.matrices},
               {"out", o.out}};
}

ojson to_json(const BaselineOptions& o) {
  return ojson{{"corpus", o.corpus},     {"method", o.method},       {"k", o.k},
               {"n-hidden", o.n_hidden}, {"n-symbols", o.n_symbols}, {"seed", o.seed},
               {"out", o.out}};
}

ojson to_json(const ExtractOptions& o) {
  return ojson{{"pred", o.pred},           {"corpus", o.corpus},       {"structure", o.structure},
               {"n-states", o.n_states},   {"threshold", o.threshold}, {"dot-out", o.dot_out}};
}

void cmd_generate(const GenerateOptions& o) {
  const GroundTruthStructure structure = resolve_structure(o.structure);
  RunManifest manifest("generate", to_json(o), o.seed);
  if (fs::is_regular_file(o.structure) && !find_structure(o.structure)) manifest.add_input(o.structure);
  RngState rng(o.seed);
  const std::optional<std::size_t> max_turns =
      o.max_turns ? std::optional<std::size_t>(o.max_turns) : std::nullopt;
  const Corpus corpus = generate_synthetic(structure, o.n, o.min_turns, max_turns, rng);
  ensure_parent(o.out);
  save_corpus(corpus, o.out);
  manifest.add_output(o.out);
  manifest.write(manifest_path(o.out));
}

void cmd_train(const TrainOptions& o) {
  const Corpus corpus = load_corpus(o.corpus);
  RunManifest manifest("train", to_json(o), o.seed);
  manifest.add_input(o.corpus);

  TrainConfig c;
  c.model.n_state = o.n_state;
  if (c.model.n_state == 0) c.model.n_state = corpus_labeled(corpus) ? infer_n_true(corpus) + 2 : 8;
  c.model.d_model = o.d_model;
  c.model.n_layers = o.layers;
  c.model.n_heads = o.heads;
  c.model.d_ff = o.d_ff;
  c.model.max_pairs = o.max_pairs;
  c.model.max_seq_len = o.max_seq_len;
  c.model.lambda = o.lambda;
  c.model.tau = {o.tau_start, o.tau_end, 0.0};
  c.model.hard_gumbel = o.gumbel == "hard";
  c.model.decoder_attention = parse_decoder_attention(o.decoder_attention);
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.loss = parse_balance_loss(o.loss);
  c.greedy_epochs = o.greedy_epochs;
  c.after_greedy = parse_balance_loss(o.after_greedy);
  c.adam.lr = o.lr;
  c.keyword_epochs = o.keyword_epochs;
  c.keyword_k = o.keyword_k;
  c.seed = o.seed;
  c.eval_every = o.eval_every;

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  c.checkpoint_path = dir / "model.ckpt";
  c.log_path = dir / "train_log.jsonl";
  const TrainResult r = train(corpus, c, [](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << " mlm " << e.mlm << " balance " << e.balance;
    if (e.sed) std::cerr << " sed " << *e.sed << " sce " << *e.sce;
    std::cerr << "\n";
  });
  save_checkpoint(r.model, dir / "final.ckpt");
  manifest.add_output(dir / "model.ckpt");
  manifest.add_output(dir / "final.ckpt");
  manifest.add_output(dir / "train_log.jsonl");
  manifest.write(dir / "manifest.json");
}

void cmd_eval(const EvalOptions& o) {
  const Corpus corpus = load_corpus(o.corpus);
  RunManifest manifest("eval", to_json(o), 0);
  manifest.add_input(o.corpus);
  const Predictions p = load_predictions(o.pred, corpus, manifest);
  const std::size_t n_true = o.n_true ? o.n_true : infer_n_true(corpus);
  const std::size_t n_pred = o.n_pred ? o.n_pred : p.n_states;
  const EvaluationResult r = evaluate(corpus_gold_sequences(corpus), p.sequences, n_true, n_pred,
                                      o.epsilon);
  ensure_parent(o.out);
  write_text(o.out, report_json(r, o.matrices).dump(2) + "\n");
  manifest.add_output(o.out);
  manifest.write(manifest_path(o.out));
}

void cmd_baseline(const BaselineOptions& o) {
  const Corpus corpus = load_corpus(o.corpus);
  RunManifest manifest("baseline", to_json(o), o.seed);
  manifest.add_input(o.corpus);
  auto pick = [&](std::size_t v, const char* flag) {
    if (v) return v;
    if (!corpus_labeled(corpus))
      throw ParameterError(std::string(flag) + " is required for an unlabeled corpus");
    return infer_n_true(corpus);
  };
  RngState rng(o.seed);
  StateSequences seqs;
  if (o.method == "kmeans")
    seqs = kmeans_baseline(corpus, pick(o.k, "--k"), rng);
  else if (o.method == "hmm")
    seqs = hmm_baseline(corpus, pick(o.n_hidden, "--n-hidden"), rng, o.n_symbols);
  else
    throw ParameterError("unknown baseline method '" + o.method + "' (kmeans, hmm)");
  ensure_parent(o.out);
  save_states(to_records(corpus, seqs), o.out);
  manifest.add_output(o.out);
  manifest.write(manifest_path(o.out));
}

void cmd_extract(const ExtractOptions& o) {
  RunManifest manifest("extract", to_json(o), 0);
  TransitionMatrix t;
  std::vector<std::string> labels;
  std::optional<std::vector<double>> occupancy;
  if (!o.structure.empty()) {
    if (!o.pred.empty()) throw ParameterError("--structure and --pred are mutually exclusive");
    const GroundTruthStructure s = resolve_structure(o.structure);
    if (fs::is_regular_file(o.structure) && !find_structure(o.structure)) manifest.add_input(o.structure);
    t = TransitionMatrix::from_probs(s.trans);
    labels = s.states;
  } else {
    if (o.pred.empty()) throw ParameterError("one of --pred or --structure is required");
    if (o.corpus.empty()) throw ParameterError("--corpus is required with --pred");
    const Corpus corpus = load_corpus(o.corpus);
    manifest.add_input(o.corpus);
    const Predictions p = load_predictions(o.pred, corpus, manifest);
    const std::size_t n = o.n_states ? o.n_states : p.n_states;
    t = estimate_transition(p.sequences, n);
    occupancy = state_occupancy(p.sequences, n);
  }
  const StructureGraph g = extract_structure(t, labels, o.threshold, occupancy);
  ensure_parent(o.dot_out);
  write_text(o.dot_out, export_dot(g));
  manifest.add_output(o.dot_out);
  manifest.write(manifest_path(o.dot_out));
}

namespace {

// --config reader: a JSON object whose keys are option names, with one
// nested object per subcommand. A run manifest is accepted as well; only
// its "config" member is read.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    ojson j = ojson::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      if (opt->count() > 0)
        j[opt->get_lnames()[0]] = opt->results().size() == 1 ? ojson(opt->results()[0]) : ojson(opt->results());
      else if (default_also && !opt->get_default_str().empty())
        j[opt->get_lnames()[0]] = opt->get_default_str();
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    ojson j;
    try {
      j = ojson::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("config") && j["config"].is_object()) j = j["config"];
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const ojson& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const ojson& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (it->is_object()) {
        auto p = parents;
        p.push_back(it.key());
        collect(*it, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array())
        for (const auto& v : *it) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(*it));
      out.push_back(std::move(item));
    }
  }
};

std::string version_text() {
  std::ostringstream s;
  s << kToolName << " " << kToolVersion << " (corpus format " << kCorpusFormatVersion
    << ", checkpoint format " << kCheckpointVersion << ", states format " << kStatesFormatVersion
    << ", report format " << kReportFormatVersion << ")";
  return s.str();
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Unsupervised dialogue structure learning with latent states."};
  app.name(kToolName);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file pre-filling flags (flags given on the command line win)");
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Sample a synthetic corpus from a ground-truth structure");
  g->add_option("--structure", gen.structure, "Built-in name or structure JSON file")->capture_default_str();
  g->add_option("--n", gen.n, "Number of dialogues")->capture_default_str();
  g->add_option("--min-turns", gen.min_turns, "Shortest dialogue kept")->capture_default_str();
  g->add_option("--max-turns", gen.max_turns, "Longest dialogue (0: until an absorbing state)")
      ->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Corpus JSON to write")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the latent state model");
  t->add_option("--corpus", tr.corpus, "Corpus JSON")->required();
  t->add_option("--loss", tr.loss, "Balance loss")
      ->check(CLI::IsMember({"balance_kl", "greedy", "top", "none"}))
      ->capture_default_str();
  t->add_option("--lambda", tr.lambda, "Balance loss weight")->capture_default_str();
  t->add_option("--n-state", tr.n_state, "Latent states (0: gold states + 2)")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--out-dir", tr.out_dir, "Directory for checkpoints, log and manifest")->required();
  t->add_option("--batch-size", tr.batch_size, "Dialogues per batch")->capture_default_str();
  t->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--d-model", tr.d_model)->capture_default_str();
  t->add_option("--layers", tr.layers, "Transformer layers in encoder and decoder")->capture_default_str();
  t->add_option("--heads", tr.heads)->capture_default_str();
  t->add_option("--d-ff", tr.d_ff)->capture_default_str();
  t->add_option("--max-pairs", tr.max_pairs)->capture_default_str();
  t->add_option("--max-seq-len", tr.max_seq_len)->capture_default_str();
  t->add_option("--tau-start", tr.tau_start)->capture_default_str();
  t->add_option("--tau-end", tr.tau_end)->capture_default_str();
  t->add_option("--gumbel", tr.gumbel, "Straight-through one-hot (hard) or relaxed (soft) samples")
      ->check(CLI::IsMember({"hard", "soft"}))
      ->capture_default_str();
  t->add_option("--decoder-attention", tr.decoder_attention,
                "Decoder rows attend across the dialogue or within their pair")
      ->check(CLI::IsMember({"dialogue", "pair"}))
      ->capture_default_str();
  t->add_option("--greedy-epochs", tr.greedy_epochs, "Epochs of Greedy Balance")->capture_default_str();
  t->add_option("--after-greedy", tr.after_greedy, "Loss after the greedy epochs")
      ->check(CLI::IsMember({"none", "balance_kl", "top"}))
      ->capture_default_str();
  t->add_option("--keyword-epochs", tr.keyword_epochs)->capture_default_str();
  t->add_option("--keyword-k", tr.keyword_k)->capture_default_str();
  t->add_option("--eval-every", tr.eval_every)->capture_default_str();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score predicted states against gold labels");
  e->add_option("--corpus", ev.corpus, "Labeled corpus JSON")->required();
  e->add_option("--pred", ev.pred, "Checkpoint, states JSON-lines file, or 'gold'")->required();
  e->add_option("--n-true", ev.n_true, "Gold state count (0: infer)")->capture_default_str();
  e->add_option("--n-pred", ev.n_pred, "Predicted state count (0: infer)")->capture_default_str();
  e->add_option("--epsilon", ev.epsilon, "Transition smoothing")->capture_default_str();
  e->add_flag("--matrices", ev.matrices, "Include matrices in the report");
  e->add_option("--out", ev.out, "Report JSON to write")->required();

  BaselineOptions bl;
  auto* b = app.add_subcommand("baseline", "Run a K-Means or HMM baseline");
  b->add_option("--corpus", bl.corpus)->required();
  b->add_option("--method", bl.method)->check(CLI::IsMember({"kmeans", "hmm"}))->capture_default_str();
  b->add_option("--k", bl.k, "Clusters (0: gold state count)")->capture_default_str();
  b->add_option("--n-hidden", bl.n_hidden, "HMM states (0: gold state count)")->capture_default_str();
  b->add_option("--n-symbols", bl.n_symbols, "HMM observation clusters (0: 2 x n-hidden)")
      ->capture_default_str();
  b->add_option("--seed", bl.seed)->capture_default_str();
  b->add_option("--out", bl.out, "States JSON-lines file to write")->required();

  ExtractOptions ex;
  auto* x = app.add_subcommand("extract", "Export a structure graph as DOT");
  x->add_option("--pred", ex.pred, "Checkpoint, states JSON-lines file, or 'gold'");
  x->add_option("--corpus", ex.corpus, "Corpus the predictions refer to");
  x->add_option("--structure", ex.structure, "Built-in or file structure instead of predictions");
  x->add_option("--n-states", ex.n_states, "State count (0: infer)")->capture_default_str();
  x->add_option("--threshold", ex.threshold, "Smallest edge probability drawn")->capture_default_str();
  x->add_option("--dot-out", ex.dot_out, "DOT file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*g) cmd_generate(gen);
    if (*t) cmd_train(tr);
    if (*e) cmd_eval(ev);
    if (*b) cmd_baseline(bl);
    if (*x) cmd_extract(ex);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dstruct::cli
