// evaluation_test.cc
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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "dstruct/error.hpp"
#include "dstruct/evaluation.hpp"
#include "golden.hpp"
#include "oracles.hpp"

namespace dstruct {
namespace {

using oracle::Mat;
using oracle::Seqs;

void expect_near(const Matrix& a, const Mat& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j) EXPECT_NEAR(a[i][j], b[i][j], tol) << i << "," << j;
  }
}

Seqs random_sequences(std::size_t n_states, oracle::RandomSource& r) {
  Seqs s(3 + r.index(8));
  for (auto& seq : s) {
    seq.resize(1 + r.index(10));
    for (auto& x : seq) x = r.index(n_states);
  }
  return s;
}

std::vector<std::size_t> flatten(const Seqs& s) {
  std::vector<std::size_t> out;
  for (const auto& seq : s) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

TEST(TransitionTest, CountsAndSmoothing) {
  const Seqs s{{0, 1, 1, 0}, {1, 0}};
  const TransitionMatrix t = estimate_transition(s, 3);
  EXPECT_EQ(t.counts, (Matrix{{0, 1, 0}, {2, 1, 0}, {0, 0, 0}}));
  EXPECT_EQ(t.probs[0], (std::vector<double>{0, 1, 0}));
  EXPECT_TRUE(t.uniform_rows[2]);
  EXPECT_EQ(t.probs[2], (std::vector<double>(3, 1.0 / 3.0)));
  const TransitionMatrix sm = estimate_transition(s, 3, 0.5);
  EXPECT_FALSE(sm.uniform_rows[2]);
  expect_near(sm.probs, oracle::bigram_transition(s, 3, 0.5), 1e-15);
  EXPECT_THROW(estimate_transition({{0, 3}}, 3), InputError);
  EXPECT_THROW(estimate_transition(s, 3, -1.0), InputError);
}

TEST(TransitionTest, RandomMatchesOracle) {
  oracle::RandomSource r(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + r.index(5);
    const Seqs s = random_sequences(n, r);
    const double eps = trial % 2 ? 0.0 : 0.01;
    expect_near(estimate_transition(s, n, eps).probs, oracle::bigram_transition(s, n, eps), 1e-15);
  }
}

TEST(MappingTest, MatchesCooccurrenceOracle) {
  oracle::RandomSource r(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + r.index(4), m = 2 + r.index(6);
    std::vector<std::size_t> g(30), p(30);
    for (auto& x : g) x = r.index(n);
    for (auto& x : p) x = r.index(m);
    expect_near(mapping_matrix(g, p, n, m, MappingDirection::GoldToPred).probs,
                oracle::cooccurrence_mapping(g, p, n, m), 1e-15);
    expect_near(mapping_matrix(g, p, n, m, MappingDirection::PredToGold).probs,
                oracle::cooccurrence_mapping(p, g, m, n), 1e-15);
  }
}

TEST(MappingTest, UnoccupiedRowsUniformAndErrors) {
  const std::vector<std::size_t> g{0, 0, 1}, p{2, 2, 0};
  const MappingMatrix h = mapping_matrix(g, p, 2, 3, MappingDirection::PredToGold);
  EXPECT_TRUE(h.unoccupied[1]);
  EXPECT_EQ(h.probs[1], (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(h.probs[2], (std::vector<double>{1.0, 0.0}));
  const std::vector<std::size_t> short_p{0};
  EXPECT_THROW(mapping_matrix(g, short_p, 2, 3, MappingDirection::GoldToPred), InputError);
  EXPECT_THROW(mapping_matrix(g, p, 2, 2, MappingDirection::GoldToPred), InputError);
}

TEST(ProjectionTest, MatchesLoopOracle) {
  oracle::RandomSource r(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + r.index(4), m = 2 + r.index(6);
    const Mat t = oracle::random_stochastic(m, m, r);
    const Mat g = oracle::random_stochastic(n, m, r);
    const Mat h = oracle::random_stochastic(m, n, r);
    MappingMatrix gm{n, m, g, std::vector<bool>(n, false)};
    MappingMatrix hm{m, n, h, std::vector<bool>(m, false)};
    const TransitionMatrix proj = project_transition(TransitionMatrix::from_probs(t), gm, hm);
    expect_near(proj.probs, oracle::projection(g, t, h), 1e-13);
  }
}

TEST(ProjectionTest, OffStochasticRowsFlagged) {
  MappingMatrix g{1, 1, {{0.5}}, {false}};
  MappingMatrix h{1, 1, {{1.0}}, {false}};
  const TransitionMatrix proj = project_transition(TransitionMatrix::from_probs({{1.0}}), g, h);
  EXPECT_EQ(proj.probs[0][0], 0.5);
  EXPECT_TRUE(proj.non_stochastic_rows[0]);
}

TEST(DistanceTest, SwapAndUniformCases) {
  const auto id = TransitionMatrix::from_probs({{1, 0}, {0, 1}});
  const auto swap = TransitionMatrix::from_probs({{0, 1}, {1, 0}});
  EXPECT_EQ(sed(id, swap), 1.0);
  EXPECT_EQ(sed(id, id), 0.0);
  const auto skew = TransitionMatrix::from_probs({{0.9, 0.1}, {0.3, 0.7}});
  const auto uni = TransitionMatrix::from_probs({{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_NEAR(sce(skew, uni).value, std::log(2.0), 1e-15);
  EXPECT_FALSE(sce(skew, uni).clamped);
  const SceResult c = sce(id, swap);
  EXPECT_TRUE(c.clamped);
  EXPECT_NEAR(c.value, -std::log(kSceFloor), 1e-9);
  EXPECT_THROW(sed(id, TransitionMatrix::from_probs({{1.0}})), InputError);
}

TEST(DistanceTest, GoldenValues) {
  EXPECT_EQ(golden::render_metrics(),
            golden::read_file(std::filesystem::path(GOLDEN_DIR) / "metrics.txt"));
}

TEST(EvaluateTest, PerfectPredictionScoresZero) {
  const Seqs gold{{0, 1, 2, 0}, {1, 2, 0}};
  const EvaluationResult r = evaluate(gold, gold, 3, 3);
  EXPECT_EQ(r.sed, 0.0);
  EXPECT_EQ(r.t_proj.probs, r.t_true.probs);
}

TEST(EvaluateTest, RandomMatchesOraclePipeline) {
  oracle::RandomSource r(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + r.index(4), m = 2 + r.index(6);
    const Seqs gold = random_sequences(n, r);
    Seqs pred = gold;
    for (auto& seq : pred)
      for (auto& x : seq) x = r.index(m);
    const EvaluationResult res = evaluate(gold, pred, n, m);
    const auto g = flatten(gold), p = flatten(pred);
    const Mat tt = oracle::bigram_transition(gold, n, 0.0);
    const Mat proj = oracle::projection(oracle::cooccurrence_mapping(g, p, n, m),
                                        oracle::bigram_transition(pred, m, 0.0),
                                        oracle::cooccurrence_mapping(p, g, m, n));
    EXPECT_NEAR(res.sed, oracle::sed(tt, proj), 1e-12);
    EXPECT_NEAR(res.sce, oracle::sce(tt, proj), 1e-9);
  }
}

TEST(EvaluateTest, ExactPermutationInvariance) {
  oracle::RandomSource r(15);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + r.index(4), m = 2 + r.index(6);
    const Seqs gold = random_sequences(n, r);
    Seqs pred = gold;
    for (auto& seq : pred)
      for (auto& x : seq) x = r.index(m);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[r.index(i)]);
    Seqs relabeled = pred;
    for (auto& seq : relabeled)
      for (auto& x : seq) x = perm[x];
    const EvaluationResult a = evaluate(gold, pred, n, m, 0.01);
    const EvaluationResult b = evaluate(gold, relabeled, n, m, 0.01);
    EXPECT_EQ(a.sed, b.sed);
    EXPECT_EQ(a.sce, b.sce);
  }
}

TEST(EvaluateTest, MismatchedLengthsRejected) {
  EXPECT_THROW(evaluate({{0, 1}}, {{0}}, 2, 2), InputError);
  EXPECT_THROW(evaluate({{0}}, {{0}, {1}}, 2, 2), InputError);
}

TEST(GraphTest, BusGoldDot) {
  EXPECT_EQ(golden::render_bus_dot(),
            golden::read_file(std::filesystem::path(GOLDEN_DIR) / "bus_gold.dot"));
}

TEST(GraphTest, ThresholdAndUniformRows) {
  const TransitionMatrix t = estimate_transition({{0, 1, 0, 1, 1}}, 3);
  const StructureGraph g = extract_structure(t, {"a", "b", "c"}, 0.4);
  ASSERT_EQ(g.edges.size(), 3u);
  for (const GraphEdge& e : g.edges) EXPECT_NE(e.from, 2u);
  EXPECT_EQ(extract_structure(t, {}, 0.0, std::vector<double>{0.5, 0.5, 0.0}).nodes.size(), 2u);
  EXPECT_THROW(extract_structure(t, {}, 1.0), ParameterError);
  EXPECT_THROW(extract_structure(t, {}, -0.1), ParameterError);
  const std::string dot = export_dot(g);
  EXPECT_NE(dot.find("s0 -> s1 [label=\"1.00\"]"), std::string::npos) << dot;
}

TEST(GraphTest, OccupancyShares) {
  EXPECT_EQ(state_occupancy({{0, 0, 1}, {2}}, 4), (std::vector<double>{0.5, 0.25, 0.25, 0.0}));
  EXPECT_THROW(state_occupancy({{5}}, 4), InputError);
}

TEST(StatesIoTest, JsonLinesRoundTrip) {
  const std::vector<StateRecord> recs{{"a", {0, 2, 1}}, {"b", {}}};
  const auto path = std::filesystem::temp_directory_path() / "dstruct_states_test.jsonl";
  save_states(recs, path);
  const auto back = load_states(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].dialogue_id, "a");
  EXPECT_EQ(back[0].states, recs[0].states);
  EXPECT_TRUE(back[1].states.empty());
  std::filesystem::remove(path);
  EXPECT_THROW(parse_states_jsonl("{\"dialogue_id\": 1}\n"), ParseError);
}

}  // namespace
}  // namespace dstruct
