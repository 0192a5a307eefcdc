// text.cc
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

#include "dstruct/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "dstruct/error.hpp"

namespace dstruct {

namespace {

const char* const kReserved[] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"};

std::string state_name(std::size_t i) { return "[STATE_" + std::to_string(i) + "]"; }

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

bool is_punctuation_token(std::string_view token) {
  return token.size() == 1 && is_punct(static_cast<unsigned char>(token[0]));
}

// ---- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary(std::size_t n_state_tokens) : n_state_tokens_(n_state_tokens) {
  for (const char* r : kReserved) add(r);
  for (std::size_t i = 0; i < n_state_tokens; ++i) add(state_name(i));
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t n_state_tokens) {
  std::set<std::string> seen;
  for (const std::string& t : texts)
    for (std::string& tok : tokenize(t)) seen.insert(std::move(tok));
  Vocabulary v(n_state_tokens);
  for (const std::string& tok : seen) v.add(tok);
  return v;
}

std::size_t Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size())
    throw IndexError("vocabulary id " + std::to_string(id) + " >= size " +
                     std::to_string(tokens_.size()));
  return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id(t));
  return ids;
}

std::size_t Vocabulary::state_token(std::size_t i) const {
  if (i >= n_state_tokens_)
    throw CapacityError("state token " + std::to_string(i) + " exceeds the " +
                        std::to_string(n_state_tokens_) + " reserved state tokens");
  return kFirstState + i;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
  if (!out) throw IoError("failed writing vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  for (std::size_t i = 0; i < kFirstState; ++i)
    if (i >= tokens.size() || tokens[i] != kReserved[i])
      throw ParseError("vocabulary: reserved token " + std::string(kReserved[i]) +
                       " missing at line " + std::to_string(i + 1));
  std::size_t n_state = 0;
  while (kFirstState + n_state < tokens.size() &&
         tokens[kFirstState + n_state] == state_name(n_state))
    ++n_state;
  Vocabulary v(n_state);
  for (std::size_t i = v.size(); i < tokens.size(); ++i) {
    if (v.find(tokens[i])) throw ParseError("vocabulary: duplicate token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

// ---- TF-IDF ----------------------------------------------------------------

TfIdfModel TfIdfModel::fit(std::span<const std::string> corpus) {
  if (corpus.empty()) throw InputError("fit_tfidf: empty corpus");
  TfIdfModel m;
  m.n_docs_ = corpus.size();
  for (const std::string& doc : corpus) {
    std::set<std::string> distinct;
    for (std::string& t : tokenize(doc)) distinct.insert(std::move(t));
    for (const std::string& t : distinct) ++m.df_[t];
  }
  m.terms_.reserve(m.df_.size());
  for (const auto& [term, count] : m.df_) m.terms_.push_back(term);
  return m;
}

std::size_t TfIdfModel::df(std::string_view term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double TfIdfModel::idf(std::string_view term) const {
  return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(df(term)))) +
         1.0;
}

std::vector<std::pair<std::string, double>> TfIdfModel::scores(std::string_view utterance) const {
  const std::vector<std::string> toks = tokenize(utterance);
  std::vector<std::pair<std::string, double>> out;
  if (toks.empty()) return out;
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const std::string& t : toks) ++counts[t];
  const double len = static_cast<double>(toks.size());
  for (const std::string& t : toks) {
    auto it = counts.find(t);
    if (it->second == 0) continue;  // already emitted
    out.emplace_back(t, static_cast<double>(it->second) / len * idf(t));
    it->second = 0;
  }
  return out;
}

std::optional<std::size_t> TfIdfModel::term_index(std::string_view term) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
  if (it == terms_.end() || *it != term) return std::nullopt;
  return static_cast<std::size_t>(it - terms_.begin());
}

std::vector<std::string> extract_keywords(const TfIdfModel& model, std::string_view utterance,
                                          std::size_t k) {
  if (k == 0) throw ParameterError("extract_keywords: k must be at least 1");
  auto scored = model.scores(utterance);
  std::erase_if(scored, [](const auto& s) { return is_punctuation_token(s.first); });
  // Stable sort keeps first-appearance order among equal scores.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].first);
  return out;
}

std::string augment_with_keywords(std::string_view utterance,
                                  std::span<const std::string> keywords) {
  std::string out;
  for (const std::string& kw : keywords) {
    out += kw;
    out += ' ';
  }
  out += utterance;
  return out;
}

}  // namespace dstruct
