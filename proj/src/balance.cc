// balance.cc
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

#include "dstruct/balance.hpp"

#include <cmath>

#include "dstruct/error.hpp"
#include "dstruct/ops.hpp"

namespace dstruct {

namespace {

void require_matrix(const Tensor& p, const char* what) {
  if (p.ndim() != 2 || p.rows() == 0 || p.cols() == 0)
    throw DimensionError(std::string(what) + ": expected a non-empty matrix, got " +
                         shape_string(p.shape()));
}

void require_stochastic(const Tensor& p, const char* what) {
  require_matrix(p, what);
  const std::size_t n = p.cols();
  auto v = p.data();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += v[i * n + j];
    if (!(std::abs(s - 1.0) <= 1e-6))
      throw InputError(std::string(what) + ": row " + std::to_string(i) + " sums to " +
                       std::to_string(s));
  }
}

}  // namespace

std::string to_string(BalanceLossKind kind) {
  switch (kind) {
    case BalanceLossKind::None: return "none";
    case BalanceLossKind::BalanceKL: return "balance_kl";
    case BalanceLossKind::GreedyBalance: return "greedy";
    case BalanceLossKind::TopBalance: return "top";
  }
  return "none";
}

BalanceLossKind parse_balance_loss(const std::string& name) {
  if (name == "none") return BalanceLossKind::None;
  if (name == "balance_kl") return BalanceLossKind::BalanceKL;
  if (name == "greedy") return BalanceLossKind::GreedyBalance;
  if (name == "top") return BalanceLossKind::TopBalance;
  throw ParameterError("unknown balance loss '" + name + "' (none, balance_kl, greedy, top)");
}

Tensor balance_regularizer(const Tensor& p) {
  require_stochastic(p, "balance_regularizer");
  const Tensor cs = column_sum(p);
  return sum(mul(cs, cs));
}

Tensor hard_target(const Tensor& p) {
  require_matrix(p, "hard_target");
  const std::size_t u = p.rows(), n = p.cols();
  auto v = p.data();
  std::vector<double> t(u * n, 0.0);
  for (std::size_t i = 0; i < u; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (v[i * n + j] > v[i * n + best]) best = j;
    t[i * n + best] = 1.0;
  }
  return Tensor::from_data({u, n}, std::move(t));
}

Tensor balance_kl_loss(const Tensor& p) {
  return add(balance_regularizer(p), kl_divergence(hard_target(p), p));
}

Tensor greedy_target(const Tensor& p) {
  require_matrix(p, "greedy_target");
  const std::size_t u = p.rows(), n = p.cols();
  auto v = p.data();
  std::vector<double> t(u * n, 0.0);
  std::vector<bool> taken(u, false);
  std::size_t remaining = u;
  for (std::size_t j = 0; remaining > 0; j = (j + 1) % n) {
    std::size_t best = u;
    for (std::size_t i = 0; i < u; ++i)
      if (!taken[i] && (best == u || v[i * n + j] > v[best * n + j])) best = i;
    taken[best] = true;
    t[best * n + j] = 1.0;
    --remaining;
  }
  return Tensor::from_data({u, n}, std::move(t));
}

Tensor greedy_balance_loss(const Tensor& p) {
  return kl_divergence(greedy_target(p), p);
}

std::vector<std::size_t> top_rows(const Tensor& p) {
  require_matrix(p, "top_rows");
  const std::size_t u = p.rows(), n = p.cols();
  auto v = p.data();
  std::vector<std::size_t> rows(n, 0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 1; i < u; ++i)
      if (v[i * n + j] > v[rows[j] * n + j]) rows[j] = i;
  return rows;
}

Tensor top_balance_loss(const Tensor& p) {
  const std::vector<std::size_t> rows = top_rows(p);
  const std::size_t n = p.cols();
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) eye[k * n + k] = 1.0;
  return kl_divergence(Tensor::from_data({n, n}, std::move(eye)), gather_rows(p, rows));
}

Tensor balance_loss(BalanceLossKind kind, const Tensor& p) {
  switch (kind) {
    case BalanceLossKind::None: return Tensor();
    case BalanceLossKind::BalanceKL: return balance_kl_loss(p);
    case BalanceLossKind::GreedyBalance: return greedy_balance_loss(p);
    case BalanceLossKind::TopBalance: return top_balance_loss(p);
  }
  return Tensor();
}

Tensor total_loss(const Tensor& mlm, const Tensor& balance, double lambda) {
  if (!(lambda >= 0.0))
    throw ParameterError("total_loss: lambda must be non-negative, got " + std::to_string(lambda));
  if (!balance.defined()) return mlm;
  return add(mlm, scale(balance, lambda));
}

}  // namespace dstruct
