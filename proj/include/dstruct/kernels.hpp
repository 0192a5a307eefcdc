// kernels.hpp
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
// Dense row-major kernels used by the tensor ops. Every kernel exists twice:
// a plain serial loop nest kept as the reference, and an OpenMP version that
// splits work over output rows. Each output element is reduced in the same
// order in both, so the two agree bitwise for any thread count.

#pragma once

#include <cstddef>
#include <span>

namespace dstruct::kernels {

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
// Row-wise max-shifted softmax of a rows x cols matrix.
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in,
                  std::span<double> out);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in,
                  std::span<double> out);

}  // namespace parallel

/// True when the library was compiled with OpenMP.
bool openmp_enabled();

// Entry points used by the tensor ops: parallel when OpenMP is available
// and the problem is large enough to amortize the fork, serial otherwise.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in,
                  std::span<double> out);

}  // namespace dstruct::kernels
