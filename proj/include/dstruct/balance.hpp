// balance.hpp
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
// Balance losses over a batch state-probability matrix P (U pairs x n
// states). Target matrices are built from P's values and carry no gradient.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dstruct/tensor.hpp"

namespace dstruct {

enum class BalanceLossKind { None, BalanceKL, GreedyBalance, TopBalance };

std::string to_string(BalanceLossKind kind);
/// Accepts none, balance_kl, greedy, top. Throws ParameterError otherwise.
BalanceLossKind parse_balance_loss(const std::string& name);

/// Sum over columns of the squared column sums. Throws InputError when a
/// row sum deviates from 1 by more than 1e-6.
Tensor balance_regularizer(const Tensor& p);

/// Row-wise one-hot at the argmax, ties to the lowest column.
Tensor hard_target(const Tensor& p);

/// balance_regularizer(P) + KL(hard_target(P) || P).
Tensor balance_kl_loss(const Tensor& p);

/// Round-robin assignment: columns take turns, each claiming the unassigned
/// row with the highest probability in that column (ties to the lowest row)
/// until every row is assigned.
Tensor greedy_target(const Tensor& p);
Tensor greedy_balance_loss(const Tensor& p);

/// Row index picked for each column: the column's argmax row, ties to the
/// lowest row. Rows may repeat.
std::vector<std::size_t> top_rows(const Tensor& p);
/// KL(I || P') where row k of P' is P[top_rows(P)[k]].
Tensor top_balance_loss(const Tensor& p);

/// The loss for `kind` applied to P; None yields an undefined tensor.
Tensor balance_loss(BalanceLossKind kind, const Tensor& p);

/// mlm + lambda * balance. Throws ParameterError for negative lambda. An
/// undefined balance tensor contributes nothing.
Tensor total_loss(const Tensor& mlm, const Tensor& balance, double lambda);

}  // namespace dstruct
