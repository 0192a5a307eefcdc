// ops.hpp
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
// Differentiable operations on Tensor. Matrices are row-major 2-D tensors;
// "row vector" arguments may be 1-D of length cols or 2-D 1 x cols.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dstruct/tensor.hpp"

namespace dstruct {

class RngState;

/// Lower clamp applied to probabilities inside every log.
inline constexpr double kProbFloor = 1e-12;

enum class Reduction { Mean, Sum };

// ---- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- elementwise ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// m x n matrix plus a length-n row vector broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over rows of an m x n matrix, giving a length-n vector.
Tensor column_sum(const Tensor& a);

// ---- shape plumbing ------------------------------------------------------

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
/// Row i of `a` repeated counts[i] times, rows kept in order.
Tensor repeat_rows(const Tensor& a, std::span<const std::size_t> counts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);

// ---- normalization and probabilities -------------------------------------

/// Max-shifted softmax along `axis` (negative counts from the end).
/// Throws NumericError on NaN input.
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax_rows(const Tensor& x);
/// Row-wise layer normalization with learned gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Rows of `table` picked by token id. Throws IndexError for ids >= rows.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);
/// x * w + b.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Full (non-causal) scaled dot-product self-attention over the rows of x,
/// split into n_heads heads of width d/n_heads. Non-empty `blocks` splits the
/// rows into consecutive segments of those lengths; a row then attends only
/// within its own segment.
Tensor multi_head_self_attention(const Tensor& x, const AttentionWeights& w,
                                 std::size_t n_heads,
                                 std::span<const std::size_t> blocks = {});

// ---- discrete latent sampling --------------------------------------------

/// Independent standard Gumbel draws for a tensor of `shape`.
std::vector<double> sample_gumbel(const Shape& shape, RngState& rng);

/// Row-wise Gumbel-Softmax with caller-supplied noise. With hard=true the
/// forward value is the one-hot of the perturbed argmax (ties to the lowest
/// index) and the backward pass uses the soft relaxation (straight-through).
Tensor gumbel_softmax_with_noise(const Tensor& logits, std::span<const double> noise,
                                 double tau, bool hard);
Tensor gumbel_softmax(const Tensor& logits, double tau, RngState& rng, bool hard);

// ---- losses --------------------------------------------------------------

/// Cross-entropy of row-wise softmax(logits) against integer targets.
/// Positions whose target equals ignore_index are skipped; Mean divides by
/// the number of scored positions.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     std::optional<std::size_t> ignore_index = std::nullopt,
                     Reduction reduction = Reduction::Mean);

/// sum T * (log T - log max(P, kProbFloor)), with 0 log 0 = 0. The target is
/// a constant: no gradient flows into it.
Tensor kl_divergence(const Tensor& target, const Tensor& p);

}  // namespace dstruct
