// baselines_test.cc
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
#include <vector>

#include "dstruct/baselines.hpp"
#include "dstruct/error.hpp"
#include "dstruct/rng.hpp"
#include "oracles.hpp"

namespace dstruct {
namespace {

using oracle::Mat;

HmmModel random_hmm(std::size_t h, std::size_t s, oracle::RandomSource& r) {
  HmmModel m;
  m.pi = oracle::random_stochastic(1, h, r)[0];
  m.a = oracle::random_stochastic(h, h, r);
  m.b = oracle::random_stochastic(h, s, r);
  return m;
}

std::vector<std::size_t> random_obs(std::size_t len, std::size_t s, oracle::RandomSource& r) {
  std::vector<std::size_t> o(len);
  for (auto& x : o) x = r.index(s);
  return o;
}

TEST(HmmTest, LikelihoodMatchesBruteForce) {
  oracle::RandomSource r(21);
  for (int trial = 0; trial < 20; ++trial) {
    const HmmModel m = random_hmm(3, 4, r);
    const auto obs = random_obs(1 + r.index(6), 4, r);
    EXPECT_NEAR(hmm_log_likelihood(m, obs), oracle::hmm_brute_loglik(m.pi, m.a, m.b, obs), 1e-10);
  }
}

TEST(HmmTest, ViterbiMatchesBruteForce) {
  oracle::RandomSource r(22);
  for (int trial = 0; trial < 50; ++trial) {
    const HmmModel m = random_hmm(3, 4, r);
    const auto obs = random_obs(5, 4, r);
    EXPECT_EQ(hmm_decode(m, obs).states, oracle::hmm_brute_viterbi(m.pi, m.a, m.b, obs));
  }
}

TEST(HmmTest, UnseenSymbolScoredUniformly) {
  oracle::RandomSource r(23);
  const HmmModel m = random_hmm(2, 3, r);
  const HmmDecodeResult d = hmm_decode(m, {0, 7, 1});
  EXPECT_TRUE(d.unseen_symbol);
  EXPECT_EQ(d.states.size(), 3u);
}

TEST(HmmTest, BaumWelchLikelihoodMonotone) {
  oracle::RandomSource r(24);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 2 + r.index(3), s = 2 + r.index(4);
    StateSequences obs(5 + r.index(10));
    for (auto& seq : obs) seq = random_obs(2 + r.index(12), s, r);
    RngState rng(static_cast<std::uint64_t>(trial));
    const HmmFitResult fit = hmm_fit(obs, h, s, rng, 50, 0.0);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
      EXPECT_GE(fit.log_likelihood[i],
                fit.log_likelihood[i - 1] - 1e-9 * std::abs(fit.log_likelihood[i - 1]))
          << "trial " << trial << " step " << i;
    EXPECT_NO_THROW(fit.model.validate());
  }
}

TEST(HmmTest, RecoversTwoStateModel) {
  HmmModel truth;
  truth.pi = {0.6, 0.4};
  truth.a = {{0.8, 0.2}, {0.3, 0.7}};
  truth.b = {{0.7, 0.2, 0.1}, {0.1, 0.2, 0.7}};
  RngState rng(5);
  StateSequences obs;
  for (int i = 0; i < 1000; ++i) obs.push_back(hmm_sample(truth, 30, rng).second);
  // EM can stall at a symmetric saddle, so keep the best of a few restarts.
  HmmFitResult best;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RngState fit_rng(seed);
    HmmFitResult fit = hmm_fit(obs, 2, 3, fit_rng, 500, 1e-8);
    if (best.log_likelihood.empty() || fit.log_likelihood.back() > best.log_likelihood.back())
      best = std::move(fit);
  }
  const HmmModel& m = best.model;
  // Hidden labels are only defined up to a swap.
  const bool swapped = m.b[0][0] < m.b[1][0];
  const auto at = [&](std::size_t i) { return swapped ? 1 - i : i; };
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(m.pi[at(i)], truth.pi[i], 0.05);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(m.a[at(i)][at(j)], truth.a[i][j], 0.05);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(m.b[at(i)][k], truth.b[i][k], 0.05);
  }
}

TEST(HmmTest, InputErrors) {
  RngState rng(1);
  EXPECT_THROW(hmm_fit({{0, 3}}, 2, 3, rng), InputError);
  EXPECT_THROW(hmm_fit({{}}, 2, 3, rng), InputError);
  HmmModel bad{{0.5, 0.6}, {{1, 0}, {0, 1}}, {{1}, {1}}};
  EXPECT_THROW(bad.validate(), InputError);
}

Mat blobs(oracle::RandomSource& r, std::size_t per_cluster) {
  const Mat centers{{0, 0}, {5, 5}, {-5, 5}};
  Mat x;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per_cluster; ++i)
      x.push_back({c[0] + 0.3 * r.normal(), c[1] + 0.3 * r.normal()});
  return x;
}

TEST(KMeansTest, InertiaMonotoneAndMatchesOracle) {
  oracle::RandomSource r(31);
  for (int trial = 0; trial < 20; ++trial) {
    Mat x;
    for (int i = 0; i < 40; ++i) x.push_back(oracle::random_values(3, r));
    RngState rng(static_cast<std::uint64_t>(trial));
    const KMeansModel m = kmeans_fit(x, 2 + r.index(4), rng);
    for (std::size_t i = 1; i < m.inertia_history.size(); ++i)
      EXPECT_LE(m.inertia_history[i], m.inertia_history[i - 1] + 1e-12);
    const auto labels = kmeans_assign(m, x);
    EXPECT_NEAR(kmeans_inertia(m, x), oracle::inertia(x, m.centroids, labels), 1e-10);
  }
}

TEST(KMeansTest, SeparatesBlobs) {
  oracle::RandomSource r(32);
  const Mat x = blobs(r, 30);
  RngState rng(3);
  const auto labels = kmeans_assign(kmeans_fit(x, 3, rng), x);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 1; i < 30; ++i) EXPECT_EQ(labels[c * 30 + i], labels[c * 30]);
  EXPECT_NE(labels[0], labels[30]);
  EXPECT_NE(labels[30], labels[60]);
  EXPECT_NE(labels[0], labels[60]);
}

TEST(KMeansTest, DeterministicAndTooFewPoints) {
  oracle::RandomSource r(33);
  const Mat x = blobs(r, 10);
  RngState a(9), b(9);
  EXPECT_EQ(kmeans_fit(x, 3, a).centroids, kmeans_fit(x, 3, b).centroids);
  RngState c(1);
  EXPECT_THROW(kmeans_fit({{1, 1}, {1, 1}}, 2, c), ParameterError);
}

TEST(BaselineTest, ChainThreeRecoveredUpToRelabeling) {
  const auto chain = *find_structure("chain-3");
  RngState gen(4);
  const Corpus corpus = generate_synthetic(chain, 100, 4, 8, gen);
  const auto gold = corpus_gold_sequences(corpus);
  RngState k(1), h(1);
  EXPECT_TRUE(oracle::is_relabeling(gold, kmeans_baseline(corpus, 3, k)));
  const StateSequences hmm = hmm_baseline(corpus, 3, h);
  ASSERT_EQ(hmm.size(), gold.size());
  for (std::size_t d = 0; d < gold.size(); ++d) EXPECT_EQ(hmm[d].size(), gold[d].size());
}

}  // namespace
}  // namespace dstruct
