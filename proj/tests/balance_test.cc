// balance_test.cc
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
#include <numeric>
#include <vector>

#include "dstruct/balance.hpp"
#include "dstruct/error.hpp"
#include "oracles.hpp"

namespace dstruct {
namespace {

using oracle::Mat;
using oracle::to_mat;
using oracle::to_tensor;

Mat uniform(std::size_t u, std::size_t n) { return Mat(u, std::vector<double>(n, 1.0 / n)); }

TEST(RegularizerTest, ClosedForms) {
  EXPECT_NEAR(balance_regularizer(to_tensor(uniform(6, 3))).item(), 36.0 / 3.0, 1e-12);
  Mat one_col(5, std::vector<double>{0, 1, 0});
  EXPECT_EQ(balance_regularizer(to_tensor(one_col)).item(), 25.0);
}

TEST(RegularizerTest, MatchesLoopOracle) {
  oracle::RandomSource r(1);
  const Mat p = oracle::random_stochastic(4, 3, r);
  EXPECT_NEAR(balance_regularizer(to_tensor(p)).item(), oracle::regularizer(p), 1e-12);
}

TEST(RegularizerTest, RejectsNonStochasticRows) {
  EXPECT_THROW(balance_regularizer(to_tensor({{0.5, 0.6}})), InputError);
}

TEST(HardTargetTest, RoundsAndBreaksTiesLow) {
  const Mat p{{0.9, 0.05, 0.05}, {0.1, 0.8, 0.1}, {0.0, 0.0, 1.0}};
  EXPECT_EQ(to_mat(hard_target(to_tensor(p))), (Mat{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  EXPECT_EQ(to_mat(hard_target(to_tensor({{0.5, 0.5}}))), (Mat{{1, 0}}));
  oracle::RandomSource r(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat q = oracle::random_stochastic(7, 4, r);
    EXPECT_EQ(to_mat(hard_target(to_tensor(q))), oracle::argmax_onehot(q));
  }
}

TEST(BalanceKlTest, ClosedForms) {
  Mat onehot;
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> row(3, 0.0);
    row[i % 3] = 1.0;
    onehot.push_back(row);
  }
  EXPECT_NEAR(balance_kl_loss(to_tensor(onehot)).item(), 36.0 / 3.0, 1e-12);
  EXPECT_NEAR(balance_kl_loss(to_tensor(uniform(6, 3))).item(), 12.0 + std::log(3.0) * 6.0,
              1e-12);
}

TEST(BalanceKlTest, MatchesComposedOracle) {
  oracle::RandomSource r(3);
  const Mat p = oracle::random_stochastic(6, 3, r);
  EXPECT_NEAR(balance_kl_loss(to_tensor(p)).item(), oracle::balance_kl(p), 1e-12);
}

// The assignment maximizing the summed probability, by enumeration.
std::vector<std::size_t> best_permutation(const Mat& p) {
  std::vector<std::size_t> perm(p.size()), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_score = -1.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i][perm[i]];
    if (s > best_score) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(GreedyTargetTest, PermutationDominantMatrix) {
  const Mat p{{0.1, 0.1, 0.8}, {0.85, 0.1, 0.05}, {0.1, 0.7, 0.2}};
  const auto perm = best_permutation(p);
  Mat expected(3, std::vector<double>(3, 0.0));
  for (std::size_t i = 0; i < 3; ++i) expected[i][perm[i]] = 1.0;
  EXPECT_EQ(to_mat(greedy_target(to_tensor(p))), expected);
}

TEST(GreedyTargetTest, SingleRowGoesToFirstColumn) {
  EXPECT_EQ(to_mat(greedy_target(to_tensor({{0.1, 0.9}}))), (Mat{{1, 0}}));
}

TEST(GreedyTargetTest, ColumnCountsBalancedAndOracleAgrees) {
  oracle::RandomSource r(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + r.index(6);
    const std::size_t u = 1 + r.index(40);
    const Mat p = oracle::random_stochastic(u, n, r);
    const Mat t = to_mat(greedy_target(to_tensor(p)));
    EXPECT_EQ(t, oracle::greedy_assignment(p));
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < u; ++i) count += t[i][j] == 1.0;
      EXPECT_GE(count, u / n);
      EXPECT_LE(count, (u + n - 1) / n);
    }
  }
}

TEST(GreedyBalanceTest, ClosedForms) {
  const Mat target = oracle::greedy_assignment(uniform(3, 3));
  EXPECT_EQ(greedy_balance_loss(to_tensor(target)).item(), 0.0);
  EXPECT_NEAR(greedy_balance_loss(to_tensor(uniform(4, 4))).item(), std::log(4.0) * 4.0, 1e-12);
  oracle::RandomSource r(5);
  const Mat p = oracle::random_stochastic(7, 3, r);
  EXPECT_NEAR(greedy_balance_loss(to_tensor(p)).item(), oracle::greedy_balance(p), 1e-12);
}

TEST(TopBalanceTest, ClosedForms) {
  const Mat perm{{0, 1, 0}, {0.2, 0.3, 0.5}, {1, 0, 0}, {0, 0, 1}};
  EXPECT_EQ(top_balance_loss(to_tensor(perm)).item(), 0.0);
  EXPECT_NEAR(top_balance_loss(to_tensor(uniform(5, 3))).item(), std::log(3.0) * 3.0, 1e-12);
  EXPECT_EQ(top_rows(to_tensor(uniform(5, 3))), (std::vector<std::size_t>{0, 0, 0}));
}

TEST(TopBalanceTest, MatchesColumnScanOracle) {
  oracle::RandomSource r(6);
  const Mat p = oracle::random_stochastic(5, 3, r);
  EXPECT_EQ(top_rows(to_tensor(p)), oracle::column_argmax_rows(p));
  EXPECT_NEAR(top_balance_loss(to_tensor(p)).item(), oracle::top_balance(p), 1e-12);
}

TEST(BalanceLossTest, RandomMatricesMatchOracles) {
  oracle::RandomSource r(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + r.index(7);
    const std::size_t u = n + r.index(30);
    const Mat p = oracle::random_stochastic(u, n, r, 0.5 + 2.0 * r.uniform());
    const Tensor t = to_tensor(p);
    EXPECT_NEAR(balance_loss(BalanceLossKind::BalanceKL, t).item(), oracle::balance_kl(p), 1e-10);
    EXPECT_NEAR(balance_loss(BalanceLossKind::GreedyBalance, t).item(), oracle::greedy_balance(p),
                1e-10);
    EXPECT_NEAR(balance_loss(BalanceLossKind::TopBalance, t).item(), oracle::top_balance(p), 1e-10);
  }
  EXPECT_FALSE(balance_loss(BalanceLossKind::None, to_tensor(uniform(2, 2))).defined());
}

TEST(TotalLossTest, Composition) {
  const Tensor mlm = Tensor::scalar(2.0), bal = Tensor::scalar(3.0);
  EXPECT_EQ(total_loss(mlm, bal, 0.5).item(), 3.5);
  EXPECT_EQ(total_loss(mlm, bal, 0.0).item(), 2.0);
  EXPECT_EQ(total_loss(mlm, Tensor(), 1.0).item(), 2.0);
  EXPECT_THROW(total_loss(mlm, bal, -0.1), ParameterError);
}

TEST(LossKindTest, NamesRoundTrip) {
  for (auto k : {BalanceLossKind::None, BalanceLossKind::BalanceKL, BalanceLossKind::GreedyBalance,
                 BalanceLossKind::TopBalance})
    EXPECT_EQ(parse_balance_loss(to_string(k)), k);
  EXPECT_THROW(parse_balance_loss("kl"), ParameterError);
}

}  // namespace
}  // namespace dstruct
