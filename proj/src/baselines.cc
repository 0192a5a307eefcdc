// baselines.cc
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

#include "dstruct/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dstruct/error.hpp"
#include "dstruct/rng.hpp"

namespace dstruct {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(const Matrix& centroids, const std::vector<double>& x, double* dist) {
  std::size_t best = 0;
  double best_d = sq_dist(centroids[0], x);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = sq_dist(centroids[c], x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

std::size_t count_distinct(const Matrix& x) {
  Matrix sorted = x;
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

void normalize(std::vector<double>& row) {
  double s = 0.0;
  for (double v : row) s += v;
  for (double& v : row) v /= s;
}

std::vector<double> random_stochastic_row(std::size_t n, RngState& rng) {
  std::vector<double> row(n);
  for (double& v : row) v = 0.5 + rng.uniform();
  normalize(row);
  return row;
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace

Matrix vectorize_pairs(const Corpus& corpus, const TfIdfModel& tfidf) {
  const std::size_t dim = tfidf.terms().size();
  Matrix out;
  for (const Dialogue& d : corpus)
    for (const UtterancePair& p : d.pairs) {
      std::vector<double> row(dim, 0.0);
      for (const auto& [term, score] : tfidf.scores(p.text()))
        if (auto idx = tfidf.term_index(term)) row[*idx] = score;
      double norm = 0.0;
      for (double v : row) norm += v * v;
      if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& v : row) v /= norm;
      }
      out.push_back(std::move(row));
    }
  return out;
}

std::vector<std::size_t> kmeans_assign(const KMeansModel& model, const Matrix& x) {
  if (model.centroids.empty()) throw InputError("kmeans_assign: model has no centroids");
  std::vector<std::size_t> labels(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != model.dim())
      throw InputError("kmeans_assign: row " + std::to_string(i) + " has dimension " +
                       std::to_string(x[i].size()) + ", model has " +
                       std::to_string(model.dim()));
    labels[i] = nearest(model.centroids, x[i], nullptr);
  }
  return labels;
}

double kmeans_inertia(const KMeansModel& model, const Matrix& x) {
  double s = 0.0;
  for (const auto& row : x) {
    double d = 0.0;
    nearest(model.centroids, row, &d);
    s += d;
  }
  return s;
}

KMeansModel kmeans_fit(const Matrix& x, std::size_t k, RngState& rng, std::size_t max_iters,
                       const std::optional<Matrix>& initial_centroids) {
  if (k == 0) throw ParameterError("kmeans: k must be positive");
  if (x.empty()) throw InputError("kmeans: no points");
  const std::size_t n = x.size(), dim = x[0].size();
  for (const auto& row : x)
    if (row.size() != dim) throw InputError("kmeans: rows differ in dimension");
  if (k > n)
    throw ParameterError("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(n) +
                         " points");

  KMeansModel model;
  if (initial_centroids) {
    if (initial_centroids->size() != k) throw ParameterError("kmeans: initial centroid count != k");
    model.centroids = *initial_centroids;
  } else {
    const std::size_t distinct = count_distinct(x);
    if (k > distinct)
      throw ParameterError("kmeans: k=" + std::to_string(k) + " exceeds " +
                           std::to_string(distinct) + " distinct points");
    model.centroids.push_back(x[rng.uniform_index(n)]);
    std::vector<double> d2(n);
    while (model.centroids.size() < k) {
      for (std::size_t i = 0; i < n; ++i) nearest(model.centroids, x[i], &d2[i]);
      model.centroids.push_back(x[rng.categorical(d2)]);
    }
  }

  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  auto assign_all = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest(model.centroids, x[i], &dist[i]);
      inertia += dist[i];
    }
    return inertia;
  };

  model.inertia_history.push_back(assign_all());
  for (std::size_t it = 0; it < max_iters; ++it) {
    Matrix sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t f = 0; f < dim; ++f) sums[assign[i]][f] += x[i][f];
    }
    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t f = 0; f < dim; ++f)
          model.centroids[c][f] = sums[c][f] / static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i] && (far == n || dist[i] > dist[far])) far = i;
      used[far] = true;
      model.centroids[c] = x[far];
    }
    const std::vector<std::size_t> previous = assign;
    model.inertia_history.push_back(assign_all());
    ++model.iterations;
    if (assign == previous) break;
  }
  return model;
}

void HmmModel::validate() const {
  auto check = [](const std::vector<double>& row, const std::string& what) {
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw InputError("hmm: negative or NaN entry in " + what);
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InputError("hmm: " + what + " sums to " + std::to_string(s));
  };
  const std::size_t h = n_hidden();
  if (h == 0) throw InputError("hmm: no hidden states");
  check(pi, "pi");
  if (a.size() != h || b.size() != h) throw InputError("hmm: matrix row counts differ from pi");
  for (std::size_t i = 0; i < h; ++i) {
    if (a[i].size() != h) throw InputError("hmm: A is not square");
    if (b[i].size() != n_symbols()) throw InputError("hmm: ragged B");
    check(a[i], "A row " + std::to_string(i));
    check(b[i], "B row " + std::to_string(i));
  }
}

namespace {

// Scaled forward pass; returns the log-likelihood and fills alpha and the
// per-step scale factors.
double forward_scaled(const HmmModel& m, const std::vector<std::size_t>& seq, Matrix& alpha,
                      std::vector<double>& scale) {
  const std::size_t h = m.n_hidden(), len = seq.size();
  alpha.assign(len, std::vector<double>(h, 0.0));
  scale.assign(len, 0.0);
  double ll = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    double c = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      double s;
      if (t == 0) {
        s = m.pi[j];
      } else {
        s = 0.0;
        for (std::size_t i = 0; i < h; ++i) s += alpha[t - 1][i] * m.a[i][j];
      }
      alpha[t][j] = s * m.b[j][seq[t]];
      c += alpha[t][j];
    }
    scale[t] = c;
    if (c == 0.0) return kNegInf;
    for (double& v : alpha[t]) v /= c;
    ll += std::log(c);
  }
  return ll;
}

void check_observations(const StateSequences& obs, std::size_t n_symbols) {
  std::size_t total = 0;
  for (std::size_t d = 0; d < obs.size(); ++d) {
    total += obs[d].size();
    for (std::size_t s : obs[d])
      if (s >= n_symbols)
        throw InputError("hmm: sequence " + std::to_string(d) + " has symbol " +
                         std::to_string(s) + " >= " + std::to_string(n_symbols));
  }
  if (total == 0) throw InputError("hmm: no observations");
}

double total_log_likelihood(const HmmModel& m, const StateSequences& obs) {
  Matrix alpha;
  std::vector<double> scale;
  double ll = 0.0;
  for (const auto& seq : obs)
    if (!seq.empty()) ll += forward_scaled(m, seq, alpha, scale);
  return ll;
}

}  // namespace

double hmm_log_likelihood(const HmmModel& model, const std::vector<std::size_t>& seq) {
  check_observations({seq}, model.n_symbols());
  Matrix alpha;
  std::vector<double> scale;
  return forward_scaled(model, seq, alpha, scale);
}

HmmFitResult hmm_fit(const StateSequences& observations, std::size_t n_hidden,
                     std::size_t n_symbols, RngState& rng, std::size_t max_iters, double tol,
                     const std::optional<HmmModel>& init) {
  if (n_hidden == 0) throw ParameterError("hmm: n_hidden must be positive");
  if (n_symbols == 0) throw ParameterError("hmm: n_symbols must be positive");
  check_observations(observations, n_symbols);

  HmmFitResult r;
  HmmModel& m = r.model;
  if (init) {
    m = *init;
    m.validate();
    if (m.n_hidden() != n_hidden || m.n_symbols() != n_symbols)
      throw ParameterError("hmm: initial model shape does not match");
  } else {
    m.pi = random_stochastic_row(n_hidden, rng);
    for (std::size_t i = 0; i < n_hidden; ++i) {
      m.a.push_back(random_stochastic_row(n_hidden, rng));
      m.b.push_back(random_stochastic_row(n_symbols, rng));
    }
  }

  const std::size_t h = n_hidden;
  Matrix alpha, beta;
  std::vector<double> scale;
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<double> pi_num(h, 0.0);
    Matrix a_num(h, std::vector<double>(h, 0.0)), b_num(h, std::vector<double>(n_symbols, 0.0));
    std::vector<double> a_den(h, 0.0), b_den(h, 0.0);
    double ll = 0.0;
    std::size_t n_seq = 0;
    for (const auto& seq : observations) {
      if (seq.empty()) continue;
      ++n_seq;
      const std::size_t len = seq.size();
      ll += forward_scaled(m, seq, alpha, scale);
      beta.assign(len, std::vector<double>(h, 1.0));
      for (std::size_t t = len - 1; t-- > 0;)
        for (std::size_t i = 0; i < h; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < h; ++j)
            s += m.a[i][j] * m.b[j][seq[t + 1]] * beta[t + 1][j];
          beta[t][i] = s / scale[t + 1];
        }
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t i = 0; i < h; ++i) {
          const double g = alpha[t][i] * beta[t][i];
          if (t == 0) pi_num[i] += g;
          b_num[i][seq[t]] += g;
          b_den[i] += g;
          if (t + 1 < len) {
            a_den[i] += g;
            for (std::size_t j = 0; j < h; ++j)
              a_num[i][j] += alpha[t][i] * m.a[i][j] * m.b[j][seq[t + 1]] * beta[t + 1][j] /
                             scale[t + 1];
          }
        }
    }
    r.log_likelihood.push_back(ll);
    if (it > 0 && ll - r.log_likelihood[it - 1] < tol) break;

    for (std::size_t i = 0; i < h; ++i) {
      m.pi[i] = pi_num[i] / static_cast<double>(n_seq);
      if (a_den[i] > 0.0)
        for (std::size_t j = 0; j < h; ++j) m.a[i][j] = a_num[i][j] / a_den[i];
      if (b_den[i] > 0.0)
        for (std::size_t s = 0; s < n_symbols; ++s) m.b[i][s] = b_num[i][s] / b_den[i];
    }
    normalize(m.pi);
    for (std::size_t i = 0; i < h; ++i) {
      normalize(m.a[i]);
      normalize(m.b[i]);
    }
    if (it + 1 == max_iters) r.log_likelihood.push_back(total_log_likelihood(m, observations));
  }
  return r;
}

HmmDecodeResult hmm_decode(const HmmModel& model, const std::vector<std::size_t>& seq) {
  HmmDecodeResult r;
  const std::size_t h = model.n_hidden(), len = seq.size();
  if (len == 0) return r;
  const double uniform_log = -std::log(static_cast<double>(std::max<std::size_t>(model.n_symbols(), 1)));
  auto log_emit = [&](std::size_t state, std::size_t sym) {
    if (sym >= model.n_symbols()) {
      r.unseen_symbol = true;
      return uniform_log;
    }
    return safe_log(model.b[state][sym]);
  };

  Matrix delta(len, std::vector<double>(h));
  std::vector<std::vector<std::size_t>> back(len, std::vector<std::size_t>(h, 0));
  for (std::size_t j = 0; j < h; ++j) delta[0][j] = safe_log(model.pi[j]) + log_emit(j, seq[0]);
  for (std::size_t t = 1; t < len; ++t)
    for (std::size_t j = 0; j < h; ++j) {
      std::size_t best = 0;
      double best_v = delta[t - 1][0] + safe_log(model.a[0][j]);
      for (std::size_t i = 1; i < h; ++i) {
        const double v = delta[t - 1][i] + safe_log(model.a[i][j]);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      delta[t][j] = best_v + log_emit(j, seq[t]);
      back[t][j] = best;
    }
  r.states.assign(len, 0);
  for (std::size_t j = 1; j < h; ++j)
    if (delta[len - 1][j] > delta[len - 1][r.states[len - 1]]) r.states[len - 1] = j;
  for (std::size_t t = len - 1; t > 0; --t) r.states[t - 1] = back[t][r.states[t]];
  return r;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> hmm_sample(const HmmModel& model,
                                                                          std::size_t length,
                                                                          RngState& rng) {
  std::vector<std::size_t> states, symbols;
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t s = t == 0 ? rng.categorical(model.pi) : rng.categorical(model.a[states.back()]);
    states.push_back(s);
    symbols.push_back(rng.categorical(model.b[s]));
  }
  return {states, symbols};
}

namespace {

Matrix corpus_vectors(const Corpus& corpus) {
  const std::vector<std::string> docs = corpus_utterances(corpus);
  return vectorize_pairs(corpus, TfIdfModel::fit(docs));
}

StateSequences split_by_dialogue(const Corpus& corpus, const std::vector<std::size_t>& flat) {
  StateSequences out;
  std::size_t k = 0;
  for (const Dialogue& d : corpus) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(k),
                     flat.begin() + static_cast<std::ptrdiff_t>(k + d.pairs.size()));
    k += d.pairs.size();
  }
  return out;
}

}  // namespace

StateSequences kmeans_baseline(const Corpus& corpus, std::size_t k, RngState& rng,
                               std::size_t max_iters) {
  const Matrix x = corpus_vectors(corpus);
  const KMeansModel model = kmeans_fit(x, k, rng, max_iters);
  return split_by_dialogue(corpus, kmeans_assign(model, x));
}

StateSequences hmm_baseline(const Corpus& corpus, std::size_t n_hidden, RngState& rng,
                            std::size_t n_symbols, std::size_t max_iters) {
  const Matrix x = corpus_vectors(corpus);
  const std::size_t distinct = count_distinct(x);
  if (n_symbols == 0) n_symbols = std::min(2 * n_hidden, distinct);
  const KMeansModel km = kmeans_fit(x, n_symbols, rng, 100);
  const StateSequences symbols = split_by_dialogue(corpus, kmeans_assign(km, x));
  const HmmFitResult fit = hmm_fit(symbols, n_hidden, n_symbols, rng, max_iters);
  StateSequences out;
  for (const auto& seq : symbols) out.push_back(hmm_decode(fit.model, seq).states);
  return out;
}

}  // namespace dstruct
