// text_test.cc
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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dstruct/error.hpp"
#include "dstruct/text.hpp"
#include "golden.hpp"

namespace dstruct {
namespace {

using Tokens = std::vector<std::string>;
const std::filesystem::path kGolden = GOLDEN_DIR;

TEST(TokenizeTest, SplitsPunctuation) {
  EXPECT_EQ(tokenize("Where is the bus?"), (Tokens{"where", "is", "the", "bus", "?"}));
  EXPECT_EQ(tokenize("QUERY loc=Penn"), (Tokens{"query", "loc", "=", "penn"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t\n").empty());
  EXPECT_TRUE(is_punctuation_token("?"));
  EXPECT_FALSE(is_punctuation_token("bus"));
}

TEST(TokenizeTest, GoldenFile) {
  EXPECT_EQ(golden::render_tokenizer(golden::read_file(kGolden / "tokenizer_input.txt")),
            golden::read_file(kGolden / "tokenizer_output.txt"));
}

TEST(VocabularyTest, ReservedPrefixAndLookup) {
  const std::vector<std::string> texts{"b a", "c a"};
  const Vocabulary v = Vocabulary::build(texts, 3);
  EXPECT_EQ(v.token(Vocabulary::kPad), "[PAD]");
  EXPECT_EQ(v.token(Vocabulary::kCls), "[CLS]");
  EXPECT_EQ(v.token(Vocabulary::kSep), "[SEP]");
  EXPECT_EQ(v.token(v.state_token(2)), "[STATE_2]");
  EXPECT_THROW(v.state_token(3), CapacityError);
  EXPECT_EQ(v.size(), 5u + 3u + 3u);
  EXPECT_EQ(v.id("a"), v.reserved_count());
  EXPECT_EQ(v.id("zzz"), Vocabulary::kUnk);
  EXPECT_FALSE(v.find("zzz").has_value());
}

TEST(VocabularyTest, SaveLoadRoundTrip) {
  const std::vector<std::string> texts{"the bus", "is late !"};
  const Vocabulary v = Vocabulary::build(texts, 4);
  const auto path = std::filesystem::temp_directory_path() / "dstruct_vocab_test.txt";
  v.save(path);
  const Vocabulary w = Vocabulary::load(path);
  EXPECT_EQ(v, w);
  EXPECT_EQ(w.n_state_tokens(), 4u);
  std::filesystem::remove(path);
}

TEST(TfIdfTest, SingleDocumentHasUniformIdf) {
  const std::vector<std::string> docs{"one two three two"};
  const TfIdfModel m = TfIdfModel::fit(docs);
  EXPECT_EQ(m.idf("one"), m.idf("two"));
  EXPECT_EQ(m.idf("two"), m.idf("three"));
}

TEST(TfIdfTest, IdfMonotoneInDocumentFrequency) {
  const std::vector<std::string> docs{"a b", "a c", "a d"};
  const TfIdfModel m = TfIdfModel::fit(docs);
  EXPECT_LT(m.idf("a"), m.idf("b"));
  EXPECT_EQ(m.idf("b"), m.idf("c"));
  EXPECT_DOUBLE_EQ(m.idf("a"), 1.0);
  EXPECT_EQ(m.df("a"), 3u);
  EXPECT_THROW(TfIdfModel::fit(std::vector<std::string>{}), InputError);
}

TEST(TfIdfTest, ToyTableGolden) {
  EXPECT_EQ(golden::render_tfidf(golden::read_file(kGolden / "tfidf_corpus.txt")),
            golden::read_file(kGolden / "tfidf_table.txt"));
}

TEST(KeywordsTest, RareContentWordFirst) {
  const std::vector<std::string> docs{"the bus is late", "the bus stop is near the park",
                                      "where is the train"};
  const TfIdfModel m = TfIdfModel::fit(docs);
  EXPECT_EQ(extract_keywords(m, "the bus is late", 1), (Tokens{"late"}));
  EXPECT_EQ(extract_keywords(m, "the bus is late", 2), (Tokens{"late", "bus"}));
}

TEST(KeywordsTest, SaturationAndPrecondition) {
  const std::vector<std::string> docs{"hello hello", "bye"};
  const TfIdfModel m = TfIdfModel::fit(docs);
  EXPECT_EQ(extract_keywords(m, "hello hello hello", 3), (Tokens{"hello"}));
  EXPECT_EQ(extract_keywords(m, "hello ?", 3), (Tokens{"hello"}));
  EXPECT_THROW(extract_keywords(m, "hello", 0), ParameterError);
}

TEST(AugmentTest, PrependsKeywords) {
  EXPECT_EQ(augment_with_keywords("hi", Tokens{}), "hi");
  EXPECT_EQ(augment_with_keywords("when is it", Tokens{"bus", "time"}), "bus time when is it");
  const Tokens kw{"bus", "time", "?"};
  const std::string u = "When is it, exactly?";
  EXPECT_EQ(tokenize(augment_with_keywords(u, kw)).size(), kw.size() + tokenize(u).size());
}

}  // namespace
}  // namespace dstruct
