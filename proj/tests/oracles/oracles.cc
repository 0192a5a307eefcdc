// oracles.cc
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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace dstruct::oracle {

GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<Tensor>& inputs, double h, double floor) {
  for (Tensor t : inputs) t.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) {
    if (t.has_grad())
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    else
      analytic.emplace_back(t.numel(), 0.0);
  }

  GradCheckResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = inputs[i];
    auto x = t.mutable_data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double saved = x[j];
      x[j] = saved + h;
      const double up = loss().item();
      x[j] = saved - h;
      const double down = loss().item();
      x[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = "input[" + std::to_string(i) + "] element " + std::to_string(j) +
                  " analytic " + std::to_string(a) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

// ---- random data -----------------------------------------------------------

unsigned long long RandomSource::next() {
  // splitmix64
  unsigned long long z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double RandomSource::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double RandomSource::normal() {
  double u = uniform();
  while (u == 0.0) u = uniform();
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

std::size_t RandomSource::index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

std::vector<double> random_values(std::size_t n, RandomSource& r, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * r.normal();
  return v;
}

Mat random_stochastic(std::size_t rows, std::size_t cols, RandomSource& r, double spread) {
  Mat m(rows, std::vector<double>(cols));
  for (auto& row : m) {
    double z = 0.0;
    for (double& x : row) {
      x = std::exp(spread * r.normal());
      z += x;
    }
    for (double& x : row) x /= z;
  }
  return m;
}

Tensor to_tensor(const Mat& m, bool requires_grad) {
  std::vector<double> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  return Tensor::from_data({m.size(), m.empty() ? 0 : m[0].size()}, std::move(flat),
                           requires_grad);
}

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

// ---- balance losses --------------------------------------------------------

double regularizer(const Mat& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < p[0].size(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) col += p[i][j];
    total += col * col;
  }
  return total;
}

double kl(const Mat& t, const Mat& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t[i].size(); ++j) {
      if (t[i][j] == 0.0) continue;
      s += t[i][j] * (std::log(t[i][j]) - std::log(std::max(p[i][j], 1e-12)));
    }
  return s;
}

Mat argmax_onehot(const Mat& p) {
  Mat t(p.size(), std::vector<double>(p[0].size(), 0.0));
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < p[i].size(); ++j)
      if (p[i][j] > p[i][best]) best = j;
    t[i][best] = 1.0;
  }
  return t;
}

Mat greedy_assignment(const Mat& p) {
  const std::size_t u = p.size(), n = p[0].size();
  Mat t(u, std::vector<double>(n, 0.0));
  std::vector<bool> taken(u, false);
  for (std::size_t turn = 0; turn < u; ++turn) {
    const std::size_t col = turn % n;
    std::size_t pick = u;
    for (std::size_t i = 0; i < u; ++i) {
      if (taken[i]) continue;
      if (pick == u || p[i][col] > p[pick][col]) pick = i;
    }
    taken[pick] = true;
    t[pick][col] = 1.0;
  }
  return t;
}

std::vector<std::size_t> column_argmax_rows(const Mat& p) {
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < p[0].size(); ++j) {
    std::size_t best = 0;
    double best_value = -1.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i][j] > best_value) {
        best_value = p[i][j];
        best = i;
      }
    rows.push_back(best);
  }
  return rows;
}

double balance_kl(const Mat& p) { return regularizer(p) + kl(argmax_onehot(p), p); }

double greedy_balance(const Mat& p) { return kl(greedy_assignment(p), p); }

double top_balance(const Mat& p) {
  const auto rows = column_argmax_rows(p);
  double s = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) s -= std::log(std::max(p[rows[k]][k], 1e-12));
  return s;
}

// ---- evaluation metrics ------------------------------------------------------

Mat bigram_transition(const Seqs& seqs, std::size_t n, double eps) {
  Mat t(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> counts(n, 0.0);
    double row = 0.0;
    for (const auto& s : seqs)
      for (std::size_t k = 1; k < s.size(); ++k)
        if (s[k - 1] == a) {
          counts[s[k]] += 1.0;
          row += 1.0;
        }
    for (std::size_t b = 0; b < n; ++b)
      t[a][b] = row + n * eps == 0.0 ? 1.0 / n : (counts[b] + eps) / (row + n * eps);
  }
  return t;
}

Mat cooccurrence_mapping(const std::vector<std::size_t>& from, const std::vector<std::size_t>& to,
                         std::size_t n_from, std::size_t n_to) {
  Mat m(n_from, std::vector<double>(n_to, 0.0));
  for (std::size_t a = 0; a < n_from; ++a) {
    double total = 0.0;
    for (std::size_t k = 0; k < from.size(); ++k)
      if (from[k] == a) total += 1.0;
    for (std::size_t b = 0; b < n_to; ++b) {
      double c = 0.0;
      for (std::size_t k = 0; k < from.size(); ++k)
        if (from[k] == a && to[k] == b) c += 1.0;
      m[a][b] = total == 0.0 ? 1.0 / n_to : c / total;
    }
  }
  return m;
}

Mat projection(const Mat& g, const Mat& t, const Mat& h) {
  const std::size_t n = g.size(), m = t.size();
  Mat gt(n, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < m; ++i) gt[a][j] += g[a][i] * t[i][j];
  Mat out(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < m; ++j) out[a][b] += gt[a][j] * h[j][b];
  return out;
}

double sed(const Mat& t_true, const Mat& t_proj) {
  double s = 0.0;
  for (std::size_t a = 0; a < t_true.size(); ++a)
    for (std::size_t b = 0; b < t_true.size(); ++b)
      s += (t_true[a][b] - t_proj[a][b]) * (t_true[a][b] - t_proj[a][b]);
  return std::sqrt(s) / static_cast<double>(t_true.size());
}

double sce(const Mat& t_true, const Mat& t_proj, double floor) {
  double s = 0.0;
  for (std::size_t a = 0; a < t_true.size(); ++a)
    for (std::size_t b = 0; b < t_true.size(); ++b)
      if (t_true[a][b] > 0.0) s -= t_true[a][b] * std::log(std::max(t_proj[a][b], floor));
  return s / static_cast<double>(t_true.size());
}

// ---- sequence models ---------------------------------------------------------

namespace {

// Calls f(path) for every path of the given length over n states, in
// lexicographic order.
template <typename F>
void for_each_path(std::size_t n, std::size_t len, F&& f) {
  std::vector<std::size_t> path(len, 0);
  while (true) {
    f(path);
    std::size_t k = len;
    while (k > 0 && path[k - 1] == n - 1) path[--k] = 0;
    if (k == 0) return;
    ++path[k - 1];
  }
}

double path_prob(const std::vector<double>& pi, const Mat& a, const Mat& b,
                 const std::vector<std::size_t>& obs, const std::vector<std::size_t>& path) {
  double p = pi[path[0]] * b[path[0]][obs[0]];
  for (std::size_t k = 1; k < obs.size(); ++k) p *= a[path[k - 1]][path[k]] * b[path[k]][obs[k]];
  return p;
}

}  // namespace

double hmm_brute_loglik(const std::vector<double>& pi, const Mat& a, const Mat& b,
                        const std::vector<std::size_t>& obs) {
  double total = 0.0;
  for_each_path(pi.size(), obs.size(),
                [&](const std::vector<std::size_t>& path) { total += path_prob(pi, a, b, obs, path); });
  return std::log(total);
}

std::vector<std::size_t> hmm_brute_viterbi(const std::vector<double>& pi, const Mat& a,
                                           const Mat& b, const std::vector<std::size_t>& obs) {
  std::vector<std::size_t> best;
  double best_p = -1.0;
  for_each_path(pi.size(), obs.size(), [&](const std::vector<std::size_t>& path) {
    const double p = path_prob(pi, a, b, obs, path);
    if (p > best_p) {
      best_p = p;
      best = path;
    }
  });
  return best;
}

double inertia(const Mat& x, const Mat& centroids, const std::vector<std::size_t>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t d = 0; d < x[i].size(); ++d) {
      const double diff = x[i][d] - centroids[labels[i]][d];
      s += diff * diff;
    }
  return s;
}

bool is_relabeling(const Seqs& a, const Seqs& b) {
  if (a.size() != b.size()) return false;
  std::map<std::size_t, std::size_t> forward, backward;
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d].size() != b[d].size()) return false;
    for (std::size_t k = 0; k < a[d].size(); ++k) {
      const auto [f, fresh_f] = forward.emplace(b[d][k], a[d][k]);
      const auto [g, fresh_g] = backward.emplace(a[d][k], b[d][k]);
      if (f->second != a[d][k] || g->second != b[d][k]) return false;
    }
  }
  return true;
}

}  // namespace dstruct::oracle
