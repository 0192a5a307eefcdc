// ops.cc
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

#include "dstruct/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <string>
#include <utility>

#include "dstruct/error.hpp"
#include "dstruct/kernels.hpp"
#include "dstruct/rng.hpp"

namespace dstruct {

namespace {

using detail::Node;

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
}

// Gradient buffer of a parent, or nullptr if it does not want one.
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

const std::vector<double>& value_of(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

void check_finite(std::span<const double> v, const char* op) {
  for (double x : v)
    if (std::isnan(x)) throw NumericError(std::string(op) + ": NaN input");
}

}  // namespace

// ---- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  std::vector<double> out(m * n);
  kernels::gemm_nn(m, n, k, a.data(), b.data(), out);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    std::vector<double> tmp;
    if (double* ga = grad_of(self, 0)) {
      tmp.resize(m * k);
      kernels::gemm_nt(m, k, n, self.grad, value_of(self, 1), tmp);
      for (std::size_t i = 0; i < tmp.size(); ++i) ga[i] += tmp[i];
    }
    if (double* gb = grad_of(self, 1)) {
      tmp.resize(k * n);
      kernels::gemm_tn(k, n, m, value_of(self, 0), self.grad, tmp);
      for (std::size_t i = 0; i < tmp.size(); ++i) gb[i] += tmp[i];
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k)
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()) + "^T");
  std::vector<double> out(m * n);
  kernels::gemm_nt(m, n, k, a.data(), b.data(), out);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    std::vector<double> tmp;
    if (double* ga = grad_of(self, 0)) {
      tmp.resize(m * k);
      kernels::gemm_nn(m, k, n, self.grad, value_of(self, 1), tmp);
      for (std::size_t i = 0; i < tmp.size(); ++i) ga[i] += tmp[i];
    }
    if (double* gb = grad_of(self, 1)) {
      tmp.resize(n * k);
      kernels::gemm_tn(n, k, m, self.grad, value_of(self, 0), tmp);
      for (std::size_t i = 0; i < tmp.size(); ++i) gb[i] += tmp[i];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

// ---- elementwise ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = grad_of(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& x : out) x *= s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_2d(a, "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (row.numel() != n || (row.ndim() == 2 && row.dim(0) != 1) || row.ndim() > 2)
    throw DimensionError("add_row: row " + shape_string(row.shape()) + " does not broadcast over " +
                         shape_string(a.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  auto rv = row.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  return Tensor::make_result(a.shape(), std::move(out), {a, row}, [m, n](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
  });
}

Tensor gelu(const Tensor& a) {
  // tanh approximation
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = in[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x)));
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& in = value_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = in[i];
      const double t = std::tanh(c * (x + k * x * x * x));
      const double dt = (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      g[i] += self.grad[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& x : out) x = x > 0.0 ? x : 0.0;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& in = value_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (in[i] > 0.0) g[i] += self.grad[i];
  });
}

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return Tensor::make_result({1}, {s}, {a}, [](Node& self) {
    double* g = grad_of(self, 0);
    const std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor column_sum(const Tensor& a) {
  require_2d(a, "column_sum");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(n, 0.0);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += in[i * n + j];
  return Tensor::make_result({n}, std::move(out), {a}, [m, n](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j];
  });
}

// ---- shape plumbing ------------------------------------------------------

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_2d(a, "gather_rows");
  const std::size_t r = a.dim(0), n = a.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * n);
  auto in = a.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r)
      throw IndexError("gather_rows: row " + std::to_string(idx[i]) + " out of range for " +
                       shape_string(a.shape()));
    std::copy_n(&in[idx[i] * n], n, &out[i * n]);
  }
  const std::size_t count = idx.size();
  return Tensor::make_result({count, n}, std::move(out), {a},
                             [idx = std::move(idx), n](Node& self) {
                               double* g = grad_of(self, 0);
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t j = 0; j < n; ++j)
                                   g[idx[i] * n + j] += self.grad[i * n + j];
                             });
}

Tensor repeat_rows(const Tensor& a, std::span<const std::size_t> counts) {
  require_2d(a, "repeat_rows");
  if (counts.size() != a.dim(0))
    throw DimensionError("repeat_rows: " + std::to_string(counts.size()) + " counts for " +
                         shape_string(a.shape()));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < counts.size(); ++i) idx.insert(idx.end(), counts[i], i);
  return gather_rows(a, idx);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_rows");
    if (p.dim(1) != n)
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    total += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make_result({total, n}, std::move(out),
                             std::vector<Tensor>(parts.begin(), parts.end()), [](Node& self) {
                               std::size_t offset = 0;
                               for (std::size_t p = 0; p < self.parents.size(); ++p) {
                                 const std::size_t len = self.parents[p]->value.size();
                                 if (double* g = grad_of(self, p))
                                   for (std::size_t i = 0; i < len; ++i)
                                     g[i] += self.grad[offset + i];
                                 offset += len;
                               }
                             });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_2d(a, "slice_cols");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (start + count > n)
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_string(a.shape()));
  std::vector<double> out(m * count);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(&in[i * n + start], count, &out[i * count]);
  return Tensor::make_result({m, count}, std::move(out), {a}, [m, n, start, count](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * n + start + j] += self.grad[i * count + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols");
    if (p.dim(0) != m)
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.dim(1);
    auto in = p.data();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(&in[i * w], w, &out[i * total + offset]);
    offset += w;
  }
  return Tensor::make_result({m, total}, std::move(out),
                             std::vector<Tensor>(parts.begin(), parts.end()),
                             [m, total, widths = std::move(widths)](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < widths.size(); ++p) {
                                 const std::size_t w = widths[p];
                                 if (double* g = grad_of(self, p))
                                   for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t j = 0; j < w; ++j)
                                       g[i * w + j] += self.grad[i * total + off + j];
                                 off += w;
                               }
                             });
}

// ---- normalization and probabilities -------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  check_finite(x.data(), "softmax");
  const Shape& s = x.shape();
  const int nd = static_cast<int>(s.size());
  const int ax = axis < 0 ? nd + axis : axis;
  if (ax < 0 || ax >= nd)
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " +
                         shape_string(s));
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= s[i];
  for (int i = ax + 1; i < nd; ++i) inner *= s[i];
  const std::size_t len = s[ax];

  std::vector<double> out(x.numel());
  auto in = x.data();
  if (inner == 1) {
    kernels::softmax_rows(outer, len, in, out);
  } else {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t c = 0; c < inner; ++c) {
        const std::size_t base = o * len * inner + c;
        double mx = in[base];
        for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, in[base + k * inner]);
        double total = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          out[base + k * inner] = std::exp(in[base + k * inner] - mx);
          total += out[base + k * inner];
        }
        for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
      }
  }
  std::vector<double> y = out;
  return Tensor::make_result(s, std::move(out), {x},
                             [y = std::move(y), outer, inner, len](Node& self) {
                               double* g = grad_of(self, 0);
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t c = 0; c < inner; ++c) {
                                   const std::size_t base = o * len * inner + c;
                                   double dot = 0.0;
                                   for (std::size_t k = 0; k < len; ++k)
                                     dot += self.grad[base + k * inner] * y[base + k * inner];
                                   for (std::size_t k = 0; k < len; ++k) {
                                     const std::size_t i = base + k * inner;
                                     g[i] += y[i] * (self.grad[i] - dot);
                                   }
                                 }
                             });
}

Tensor log_softmax_rows(const Tensor& x) {
  check_finite(x.data(), "log_softmax");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = in[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[i * n + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(in[i * n + j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] - lse;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_2d(x, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gamma.numel() != n || beta.numel() != n)
    throw DimensionError("layer_norm: gain/bias " + shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " do not match " + shape_string(x.shape()));
  std::vector<double> xhat(m * n), inv_std(m), out(m * n);
  auto in = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = in[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (in[i * n + j] - mu) * inv_std[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return Tensor::make_result(
      {m, n}, std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = value_of(self, 1);
        double* gx = grad_of(self, 0);
        double* gg = grad_of(self, 1);
        double* gb = grad_of(self, 2);
        std::vector<double> dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
          const double* dy = &self.grad[i * n];
          const double* xh = &xhat[i * n];
          if (gg)
            for (std::size_t j = 0; j < n; ++j) gg[j] += dy[j] * xh[j];
          if (gb)
            for (std::size_t j = 0; j < n; ++j) gb[j] += dy[j];
          if (gx) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = dy[j] * gv[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xh[j];
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j)
              gx[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
          }
        }
      });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  require_2d(table, "embedding_lookup");
  for (std::size_t id : ids)
    if (id >= table.dim(0))
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " >= table size " +
                       std::to_string(table.dim(0)));
  return gather_rows(table, ids);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_row(matmul(x, w), b);
}

Tensor multi_head_self_attention(const Tensor& x, const AttentionWeights& w,
                                 std::size_t n_heads, std::span<const std::size_t> blocks) {
  require_2d(x, "multi_head_self_attention");
  const std::size_t d = x.dim(1);
  if (n_heads == 0 || d % n_heads != 0)
    throw ParameterError("multi_head_self_attention: width " + std::to_string(d) +
                         " not divisible by " + std::to_string(n_heads) + " heads");
  const std::size_t dh = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor mask;
  if (!blocks.empty()) {
    const std::size_t m = x.rows();
    if (std::accumulate(blocks.begin(), blocks.end(), std::size_t{0}) != m ||
        std::find(blocks.begin(), blocks.end(), std::size_t{0}) != blocks.end())
      throw DimensionError("multi_head_self_attention: blocks do not partition " +
                           std::to_string(m) + " rows");
    // exp underflows to exactly zero for masked scores.
    std::vector<double> bias(m * m, -1e30);
    std::size_t start = 0;
    for (std::size_t len : blocks) {
      for (std::size_t i = start; i < start + len; ++i)
        for (std::size_t j = start; j < start + len; ++j) bias[i * m + j] = 0.0;
      start += len;
    }
    mask = Tensor::from_data({m, m}, std::move(bias));
  }

  const Tensor q = linear(x, w.wq, w.bq);
  const Tensor k = linear(x, w.wk, w.bk);
  const Tensor v = linear(x, w.wv, w.bv);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor qh = n_heads == 1 ? q : slice_cols(q, h * dh, dh);
    const Tensor kh = n_heads == 1 ? k : slice_cols(k, h * dh, dh);
    const Tensor vh = n_heads == 1 ? v : slice_cols(v, h * dh, dh);
    Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt);
    if (mask.defined()) scores = add(scores, mask);
    const Tensor attn = softmax(scores, -1);
    heads.push_back(matmul(attn, vh));
  }
  const Tensor merged = n_heads == 1 ? heads[0] : concat_cols(heads);
  return linear(merged, w.wo, w.bo);
}

// ---- discrete latent sampling --------------------------------------------

std::vector<double> sample_gumbel(const Shape& shape, RngState& rng) {
  std::vector<double> g(shape_numel(shape));
  for (double& x : g) x = rng.gumbel();
  return g;
}

Tensor gumbel_softmax_with_noise(const Tensor& logits, std::span<const double> noise, double tau,
                                 bool hard) {
  if (!(tau > 0.0)) throw ParameterError("gumbel_softmax: tau must be positive");
  if (noise.size() != logits.numel())
    throw DimensionError("gumbel_softmax: " + std::to_string(noise.size()) +
                         " noise values for " + shape_string(logits.shape()));
  check_finite(logits.data(), "gumbel_softmax");
  const std::size_t m = logits.rows(), n = logits.cols();
  auto in = logits.data();
  std::vector<double> perturbed(m * n);
  for (std::size_t i = 0; i < perturbed.size(); ++i) perturbed[i] = (in[i] + noise[i]) / tau;
  std::vector<double> soft(m * n);
  kernels::softmax_rows(m, n, perturbed, soft);

  std::vector<double> out;
  if (hard) {
    out.assign(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (perturbed[i * n + j] > perturbed[i * n + best]) best = j;
      out[i * n + best] = 1.0;
    }
  } else {
    out = soft;
  }
  return Tensor::make_result(logits.shape(), std::move(out), {logits},
                             [m, n, tau, soft = std::move(soft)](Node& self) {
                               double* g = grad_of(self, 0);
                               for (std::size_t i = 0; i < m; ++i) {
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < n; ++j)
                                   dot += self.grad[i * n + j] * soft[i * n + j];
                                 for (std::size_t j = 0; j < n; ++j)
                                   g[i * n + j] +=
                                       soft[i * n + j] * (self.grad[i * n + j] - dot) / tau;
                               }
                             });
}

Tensor gumbel_softmax(const Tensor& logits, double tau, RngState& rng, bool hard) {
  if (!(tau > 0.0)) throw ParameterError("gumbel_softmax: tau must be positive");
  const std::vector<double> noise = sample_gumbel(logits.shape(), rng);
  return gumbel_softmax_with_noise(logits, noise, tau, hard);
}

// ---- losses --------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     std::optional<std::size_t> ignore_index, Reduction reduction) {
  require_2d(logits, "cross_entropy");
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  if (targets.size() != m)
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape_string(logits.shape()));
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  std::size_t scored = 0;
  for (std::size_t t : tgt) {
    if (ignore_index && t == *ignore_index) continue;
    if (t >= n)
      throw IndexError("cross_entropy: target " + std::to_string(t) + " >= vocabulary " +
                       std::to_string(n));
    ++scored;
  }
  auto in = logits.data();
  std::vector<double> probs(m * n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &in[i * n];
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(row[j] - mx);
      z += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    if (ignore_index && tgt[i] == *ignore_index) continue;
    total += (mx + std::log(z)) - row[tgt[i]];
  }
  double factor = 1.0;
  if (reduction == Reduction::Mean) factor = scored ? 1.0 / static_cast<double>(scored) : 0.0;
  return Tensor::make_result(
      {1}, {total * factor}, {logits},
      [m, n, factor, ignore_index, tgt = std::move(tgt), probs = std::move(probs)](Node& self) {
        double* g = grad_of(self, 0);
        const double s = self.grad[0] * factor;
        for (std::size_t i = 0; i < m; ++i) {
          if (ignore_index && tgt[i] == *ignore_index) continue;
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += s * probs[i * n + j];
          g[i * n + tgt[i]] -= s;
        }
      });
}

Tensor kl_divergence(const Tensor& target, const Tensor& p) {
  if (target.numel() != p.numel())
    throw DimensionError("kl_divergence: target " + shape_string(target.shape()) + " vs " +
                         shape_string(p.shape()));
  std::vector<double> t(target.data().begin(), target.data().end());
  auto pv = p.data();
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0) continue;
    total += t[i] * (std::log(t[i]) - std::log(std::max(pv[i], kProbFloor)));
  }
  return Tensor::make_result({1}, {total}, {p}, [t = std::move(t)](Node& self) {
    double* g = grad_of(self, 0);
    const auto& pv = value_of(self, 0);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] > 0.0 && pv[i] > kProbFloor) g[i] -= self.grad[0] * t[i] / pv[i];
  });
}

}  // namespace dstruct
