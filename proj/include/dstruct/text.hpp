// text.hpp
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
// Tokenizer, vocabulary and TF-IDF keyword extraction.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dstruct {

/// Lowercases, splits on whitespace and emits every ASCII punctuation
/// character as a token of its own. Bytes >= 0x80 are word characters.
std::vector<std::string> tokenize(std::string_view text);

/// True for single-character punctuation tokens.
bool is_punctuation_token(std::string_view token);

/// Token <-> id map with a fixed reserved prefix:
///   0 [PAD], 1 [CLS], 2 [SEP], 3 [MASK], 4 [UNK], 5.. [STATE_0]..[STATE_{n-1}]
/// followed by corpus tokens in lexicographic order.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kCls = 1;
  static constexpr std::size_t kSep = 2;
  static constexpr std::size_t kMask = 3;
  static constexpr std::size_t kUnk = 4;
  static constexpr std::size_t kFirstState = 5;

  explicit Vocabulary(std::size_t n_state_tokens = 32);

  /// Vocabulary covering every token of `texts`.
  static Vocabulary build(std::span<const std::string> texts, std::size_t n_state_tokens = 32);

  /// Appends a token if new; returns its id.
  std::size_t add(const std::string& token);

  std::optional<std::size_t> find(std::string_view token) const;
  /// Id of token, [UNK] when absent.
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

  std::size_t size() const { return tokens_.size(); }
  std::size_t n_state_tokens() const { return n_state_tokens_; }
  std::size_t reserved_count() const { return kFirstState + n_state_tokens_; }
  bool is_reserved(std::size_t id) const { return id < reserved_count(); }
  /// Id of [STATE_i]. Throws CapacityError past the reserved range.
  std::size_t state_token(std::size_t i) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Plain text, one token per line, line number = id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  /// Rebuilds from an id-ordered token list, validating the reserved prefix.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::size_t n_state_tokens_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Document frequencies over utterance-documents with smoothed idf
///   idf(t) = ln((1 + N) / (1 + df(t))) + 1.
/// Term frequency is the count of t in the utterance over its token count.
class TfIdfModel {
 public:
  /// Each string is one document. Throws InputError on an empty corpus.
  static TfIdfModel fit(std::span<const std::string> corpus);

  std::size_t n_docs() const { return n_docs_; }
  std::size_t df(std::string_view term) const;
  double idf(std::string_view term) const;

  /// (token, tf * idf) for each distinct token of the utterance, in order of
  /// first appearance.
  std::vector<std::pair<std::string, double>> scores(std::string_view utterance) const;

  /// All terms seen during fitting, sorted; the feature space for vectors.
  const std::vector<std::string>& terms() const { return terms_; }
  std::optional<std::size_t> term_index(std::string_view term) const;

 private:
  std::size_t n_docs_ = 0;
  std::map<std::string, std::size_t, std::less<>> df_;
  std::vector<std::string> terms_;
};

/// The k highest-scoring distinct tokens of `utterance`, ties broken by
/// earlier first position. Punctuation is never selected. k must be >= 1.
std::vector<std::string> extract_keywords(const TfIdfModel& model, std::string_view utterance,
                                          std::size_t k);

/// Keywords joined by single spaces, then the utterance.
std::string augment_with_keywords(std::string_view utterance,
                                  std::span<const std::string> keywords);

}  // namespace dstruct
