// corpus_test.cc
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

#include "dstruct/corpus.hpp"
#include "dstruct/error.hpp"
#include "dstruct/rng.hpp"

namespace dstruct {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

TEST(CorpusIoTest, EmptyListIsEmptyCorpus) {
  EXPECT_TRUE(parse_corpus("[]").empty());
}

TEST(CorpusIoTest, LabeledDialogueRoundTrips) {
  Corpus c(1);
  c[0].id = "d0";
  c[0].pairs.push_back({"hello , where to ?", "penn station", 0});
  c[0].pairs.push_back({"anything else ?", "no thanks", 3});
  const fs::path path = temp_file("dstruct_corpus_rt.json");
  save_corpus(c, path);
  EXPECT_EQ(load_corpus(path), c);
  fs::remove(path);
}

TEST(CorpusIoTest, UnlabeledTurnsRoundTrip) {
  const Corpus c = parse_corpus(R"([{"id":"u","turns":[{"sys":"a","usr":"b","state":null}]}])");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_FALSE(c[0].labeled());
  EXPECT_FALSE(corpus_labeled(c));
  EXPECT_EQ(parse_corpus(corpus_to_json(c)), c);
  EXPECT_THROW(c[0].gold_states(), InputError);
}

TEST(CorpusIoTest, MissingUserFieldNamesTheField) {
  try {
    parse_corpus(R"([{"id":"x","turns":[{"sys":"hi","state":0}]}])");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("\"usr\""), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_corpus("{"), ParseError);
  EXPECT_THROW(parse_corpus("{}"), ParseError);
  EXPECT_THROW(parse_corpus(R"([{"id":"x","turns":[{"sys":"a","usr":"b","state":-1}]}])"),
               ParseError);
  EXPECT_THROW(load_corpus(temp_file("dstruct_does_not_exist.json")), IoError);
}

TEST(CorpusIoTest, MixedLabelsRejected) {
  EXPECT_THROW(
      parse_corpus(
          R"([{"id":"m","turns":[{"sys":"a","usr":"b","state":0},{"sys":"c","usr":"d"}]}])"),
      ParseError);
}

TEST(CorpusHelpersTest, CountsAndUtterances) {
  Corpus c(2);
  c[0].id = "a";
  c[0].pairs.push_back({"s1", "", 0});
  c[1].id = "b";
  c[1].pairs.push_back({"s2", "u2", 1});
  c[1].pairs.push_back({"s3", "u3", 0});
  EXPECT_EQ(count_pairs(c), 3u);
  EXPECT_EQ(corpus_utterances(c), (std::vector<std::string>{"s1", "s2", "u2", "s3", "u3"}));
  EXPECT_EQ(corpus_gold_sequences(c)[1], (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(c[1].pairs[0].text(), "s2 u2");
}

GroundTruthStructure fixed_chain() {
  GroundTruthStructure s;
  s.states = {"a", "b", "c"};
  s.init = {1, 0, 0};
  s.trans = {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  s.templates = {{{"sa"}, {"ua"}}, {{"sb"}, {"ub"}}, {{"sc"}, {"uc"}}};
  return s;
}

TEST(GeneratorTest, DeterministicChainGivesIdenticalSequences) {
  RngState rng(1);
  const Corpus c = generate_synthetic(fixed_chain(), 50, 5, 5, rng);
  ASSERT_EQ(c.size(), 50u);
  for (const Dialogue& d : c) EXPECT_EQ(d.gold_states(), (std::vector<std::size_t>{0, 1, 2, 0, 1}));
}

TEST(GeneratorTest, SameSeedSameCorpusText) {
  const GroundTruthStructure bus = *find_structure("bus");
  RngState a(7), b(7);
  EXPECT_EQ(corpus_to_json(generate_synthetic(bus, 200, 2, 12, a)),
            corpus_to_json(generate_synthetic(bus, 200, 2, 12, b)));
}

TEST(GeneratorTest, BigramFrequenciesMatchMatrix) {
  const GroundTruthStructure bus = *find_structure("bus");
  RngState rng(3);
  const Corpus c = generate_synthetic(bus, 10000, 1, std::nullopt, rng);
  const std::size_t n = bus.size();
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  for (const Dialogue& d : c) {
    const auto s = d.gold_states();
    for (std::size_t k = 1; k < s.size(); ++k) counts[s[k - 1]][s[k]] += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (double x : counts[i]) row += x;
    // The absorbing state ends a walk, so it has no observed successors.
    if (bus.is_absorbing(i)) continue;
    ASSERT_GT(row, 0.0);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(counts[i][j] / row, bus.trans[i][j], 0.02);
  }
}

TEST(GeneratorTest, TurnBoundsRespected) {
  const GroundTruthStructure bus = *find_structure("bus");
  RngState rng(5);
  for (const Dialogue& d : generate_synthetic(bus, 300, 3, 6, rng)) {
    EXPECT_GE(d.pairs.size(), 3u);
    EXPECT_LE(d.pairs.size(), 6u);
  }
  EXPECT_THROW(generate_synthetic(bus, 1, 0, 5, rng), ParameterError);
  EXPECT_THROW(generate_synthetic(bus, 1, 5, 3, rng), ParameterError);
  EXPECT_THROW(generate_synthetic(chain_structure(3), 1, 1, std::nullopt, rng), ParameterError);
}

TEST(StructureTest, ChainThreeIsCyclicShift) {
  const GroundTruthStructure c = *find_structure("chain-3");
  const std::vector<std::vector<double>> shift{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  EXPECT_EQ(c.trans, shift);
  EXPECT_EQ(find_structure("chain-11")->size(), 11u);
  EXPECT_FALSE(find_structure("chain-1").has_value());
  EXPECT_FALSE(find_structure("nope").has_value());
}

TEST(StructureTest, ShippedMatricesAreStochastic) {
  for (const auto& [name, s] : default_structures()) {
    EXPECT_NO_THROW(s.validate()) << name;
    for (const auto& row : s.trans) {
      double total = 0.0;
      for (double x : row) total += x;
      EXPECT_NEAR(total, 1.0, 1e-12) << name;
    }
  }
  EXPECT_TRUE(default_structures().contains("bus"));
  EXPECT_TRUE(default_structures().contains("weather"));
}

TEST(StructureTest, JsonRoundTripAndSlots) {
  GroundTruthStructure s = fixed_chain();
  s.templates[0].system = {"to {place} ?"};
  s.slots["place"] = {"oakland"};
  const GroundTruthStructure back = parse_structure(structure_to_json(s));
  EXPECT_EQ(back.states, s.states);
  EXPECT_EQ(back.trans, s.trans);
  RngState rng(2);
  const Corpus c = generate_synthetic(back, 1, 3, 3, rng);
  EXPECT_EQ(c[0].pairs[0].system_text, "to oakland ?");

  s.trans[0] = {0.5, 0.6, 0.0};
  EXPECT_THROW(s.validate(), InputError);
  EXPECT_THROW(parse_structure("[1,2]"), ParseError);
}

}  // namespace
}  // namespace dstruct
