// evaluation.cc
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

#include "dstruct/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dstruct/error.hpp"

namespace dstruct {

namespace {

constexpr double kRowTolerance = 1e-9;

void require_square(const TransitionMatrix& t, const char* what) {
  if (t.probs.size() != t.n)
    throw InputError(std::string(what) + ": matrix has " + std::to_string(t.probs.size()) +
                     " rows, expected " + std::to_string(t.n));
  for (const auto& row : t.probs)
    if (row.size() != t.n)
      throw InputError(std::string(what) + ": row of length " + std::to_string(row.size()) +
                       ", expected " + std::to_string(t.n));
}

std::vector<bool> off_stochastic(const Matrix& m) {
  std::vector<bool> flags(m.size(), false);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double s = 0.0;
    for (double x : m[i]) s += x;
    flags[i] = std::abs(s - 1.0) > kRowTolerance;
  }
  return flags;
}

std::vector<std::size_t> flatten(const StateSequences& s) {
  std::vector<std::size_t> out;
  for (const auto& seq : s) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

}  // namespace

TransitionMatrix TransitionMatrix::from_probs(Matrix probs) {
  TransitionMatrix t;
  t.n = probs.size();
  t.counts.assign(t.n, std::vector<double>(t.n, 0.0));
  t.uniform_rows.assign(t.n, false);
  t.probs = std::move(probs);
  require_square(t, "transition matrix");
  t.non_stochastic_rows = off_stochastic(t.probs);
  return t;
}

TransitionMatrix estimate_transition(const StateSequences& sequences, std::size_t n,
                                     double epsilon) {
  if (n == 0) throw InputError("estimate_transition: state count must be positive");
  if (!(epsilon >= 0.0)) throw InputError("estimate_transition: epsilon must be non-negative");
  TransitionMatrix t;
  t.n = n;
  t.counts.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t d = 0; d < sequences.size(); ++d) {
    const auto& seq = sequences[d];
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] >= n)
        throw InputError("estimate_transition: sequence " + std::to_string(d) + " position " +
                         std::to_string(i) + " has state " + std::to_string(seq[i]) +
                         " >= " + std::to_string(n));
      if (i > 0) t.counts[seq[i - 1]][seq[i]] += 1.0;
    }
  }
  t.probs.assign(n, std::vector<double>(n, 0.0));
  t.uniform_rows.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (double c : t.counts[i]) row += c;
    const double denom = row + static_cast<double>(n) * epsilon;
    if (denom == 0.0) {
      t.uniform_rows[i] = true;
      std::fill(t.probs[i].begin(), t.probs[i].end(), 1.0 / static_cast<double>(n));
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) t.probs[i][j] = (t.counts[i][j] + epsilon) / denom;
  }
  t.non_stochastic_rows.assign(n, false);
  return t;
}

MappingMatrix mapping_matrix(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                             std::size_t n_gold, std::size_t n_pred, MappingDirection direction) {
  if (gold.size() != pred.size())
    throw InputError("mapping_matrix: " + std::to_string(gold.size()) + " gold labels vs " +
                     std::to_string(pred.size()) + " predicted");
  const bool g2p = direction == MappingDirection::GoldToPred;
  MappingMatrix m;
  m.rows = g2p ? n_gold : n_pred;
  m.cols = g2p ? n_pred : n_gold;
  if (m.rows == 0 || m.cols == 0) throw InputError("mapping_matrix: empty label space");
  m.probs.assign(m.rows, std::vector<double>(m.cols, 0.0));
  std::vector<double> marginal(m.rows, 0.0);
  for (std::size_t k = 0; k < gold.size(); ++k) {
    if (gold[k] >= n_gold || pred[k] >= n_pred)
      throw InputError("mapping_matrix: label out of range at position " + std::to_string(k));
    const std::size_t a = g2p ? gold[k] : pred[k];
    const std::size_t b = g2p ? pred[k] : gold[k];
    m.probs[a][b] += 1.0;
    marginal[a] += 1.0;
  }
  m.unoccupied.assign(m.rows, false);
  for (std::size_t a = 0; a < m.rows; ++a) {
    if (marginal[a] == 0.0) {
      m.unoccupied[a] = true;
      std::fill(m.probs[a].begin(), m.probs[a].end(), 1.0 / static_cast<double>(m.cols));
      continue;
    }
    for (double& x : m.probs[a]) x /= marginal[a];
  }
  return m;
}

TransitionMatrix project_transition(const TransitionMatrix& t_pred,
                                    const MappingMatrix& gold_to_pred,
                                    const MappingMatrix& pred_to_gold) {
  require_square(t_pred, "project_transition");
  const std::size_t m = t_pred.n;
  const std::size_t n = gold_to_pred.rows;
  if (gold_to_pred.cols != m || pred_to_gold.rows != m || pred_to_gold.cols != n)
    throw InputError("project_transition: mapping shapes " + std::to_string(gold_to_pred.rows) +
                     "x" + std::to_string(gold_to_pred.cols) + " and " +
                     std::to_string(pred_to_gold.rows) + "x" + std::to_string(pred_to_gold.cols) +
                     " do not fit a " + std::to_string(m) + "-state transition matrix");
  Matrix out(n, std::vector<double>(n, 0.0));
  std::vector<double> terms(m * m);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          terms[i * m + j] = gold_to_pred.probs[a][i] * t_pred.probs[i][j] * pred_to_gold.probs[j][b];
      // Summing in sorted order makes the result independent of how the
      // predicted states are numbered.
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double t : terms) s += t;
      out[a][b] = s;
    }
  return TransitionMatrix::from_probs(std::move(out));
}

double sed(const TransitionMatrix& t_true, const TransitionMatrix& t_proj) {
  require_square(t_true, "sed");
  require_square(t_proj, "sed");
  if (t_true.n != t_proj.n)
    throw InputError("sed: " + std::to_string(t_true.n) + " vs " + std::to_string(t_proj.n) +
                     " states");
  double s = 0.0;
  for (std::size_t a = 0; a < t_true.n; ++a)
    for (std::size_t b = 0; b < t_true.n; ++b) {
      const double d = t_proj.probs[a][b] - t_true.probs[a][b];
      s += d * d;
    }
  return std::sqrt(s) / static_cast<double>(t_true.n);
}

SceResult sce(const TransitionMatrix& t_true, const TransitionMatrix& t_proj, double epsilon) {
  require_square(t_true, "sce");
  require_square(t_proj, "sce");
  if (t_true.n != t_proj.n)
    throw InputError("sce: " + std::to_string(t_true.n) + " vs " + std::to_string(t_proj.n) +
                     " states");
  if (!(epsilon > 0.0)) throw InputError("sce: epsilon must be positive");
  SceResult r;
  double s = 0.0;
  for (std::size_t a = 0; a < t_true.n; ++a)
    for (std::size_t b = 0; b < t_true.n; ++b) {
      const double w = t_true.probs[a][b];
      if (w == 0.0) continue;
      double q = t_proj.probs[a][b];
      if (q < epsilon) {
        q = epsilon;
        r.clamped = true;
      }
      s += -std::log(q) * w;
    }
  r.value = s / static_cast<double>(t_true.n);
  return r;
}

EvaluationResult evaluate(const StateSequences& gold, const StateSequences& pred,
                          std::size_t n_true, std::size_t n_pred, double epsilon,
                          double sce_epsilon) {
  if (gold.size() != pred.size())
    throw InputError("evaluate: " + std::to_string(gold.size()) + " gold dialogues vs " +
                     std::to_string(pred.size()) + " predicted");
  for (std::size_t d = 0; d < gold.size(); ++d)
    if (gold[d].size() != pred[d].size())
      throw InputError("evaluate: dialogue " + std::to_string(d) + " has " +
                       std::to_string(gold[d].size()) + " gold and " +
                       std::to_string(pred[d].size()) + " predicted states");
  EvaluationResult r;
  r.n_true = n_true;
  r.n_pred = n_pred;
  r.t_true = estimate_transition(gold, n_true, epsilon);
  r.t_pred = estimate_transition(pred, n_pred, epsilon);
  const auto g = flatten(gold);
  const auto p = flatten(pred);
  r.gold_to_pred = mapping_matrix(g, p, n_true, n_pred, MappingDirection::GoldToPred);
  r.pred_to_gold = mapping_matrix(g, p, n_true, n_pred, MappingDirection::PredToGold);
  r.t_proj = project_transition(r.t_pred, r.gold_to_pred, r.pred_to_gold);
  r.sed = sed(r.t_true, r.t_proj);
  const SceResult c = sce(r.t_true, r.t_proj, sce_epsilon);
  r.sce = c.value;
  r.clamped = c.clamped;
  return r;
}

nlohmann::ordered_json report_json(const EvaluationResult& r, bool with_matrices) {
  nlohmann::ordered_json j{{"sed", r.sed},
                           {"sce", r.sce},
                           {"n_true", r.n_true},
                           {"n_pred", r.n_pred},
                           {"clamped", r.clamped}};
  if (with_matrices) {
    j["t_true"] = r.t_true.probs;
    j["t_pred"] = r.t_pred.probs;
    j["t_proj"] = r.t_proj.probs;
    j["gold_to_pred"] = r.gold_to_pred.probs;
    j["pred_to_gold"] = r.pred_to_gold.probs;
    std::vector<std::size_t> off;
    for (std::size_t i = 0; i < r.t_proj.non_stochastic_rows.size(); ++i)
      if (r.t_proj.non_stochastic_rows[i]) off.push_back(i);
    j["non_stochastic_rows"] = off;
  }
  return j;
}

std::vector<double> state_occupancy(const StateSequences& sequences, std::size_t n) {
  std::vector<double> occ(n, 0.0);
  double total = 0.0;
  for (const auto& seq : sequences)
    for (std::size_t s : seq) {
      if (s >= n) throw InputError("state_occupancy: state " + std::to_string(s) + " >= " +
                                   std::to_string(n));
      occ[s] += 1.0;
      total += 1.0;
    }
  if (total > 0.0)
    for (double& x : occ) x /= total;
  return occ;
}

StructureGraph extract_structure(const TransitionMatrix& t,
                                 const std::vector<std::string>& labels, double threshold,
                                 const std::optional<std::vector<double>>& occupancy) {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw ParameterError("extract_structure: threshold must lie in [0, 1), got " +
                         std::to_string(threshold));
  require_square(t, "extract_structure");
  if (!labels.empty() && labels.size() != t.n)
    throw InputError("extract_structure: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(t.n) + " states");
  if (occupancy && occupancy->size() != t.n)
    throw InputError("extract_structure: occupancy length does not match state count");

  StructureGraph g;
  std::vector<bool> keep(t.n, false);
  for (std::size_t i = 0; i < t.n; ++i) {
    keep[i] = !occupancy || (*occupancy)[i] > 0.0;
    if (!keep[i] || (!t.uniform_rows.empty() && t.uniform_rows[i])) continue;
    for (std::size_t j = 0; j < t.n; ++j) {
      const double p = t.probs[i][j];
      if (p > 0.0 && p >= threshold) g.edges.push_back({i, j, p});
    }
  }
  for (const GraphEdge& e : g.edges) keep[e.to] = true;
  for (std::size_t i = 0; i < t.n; ++i)
    if (keep[i])
      g.nodes.push_back({i, labels.empty() ? "s" + std::to_string(i) : labels[i],
                         occupancy ? (*occupancy)[i] : 0.0});
  return g;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string export_dot(const StructureGraph& graph) {
  std::ostringstream out;
  out << "digraph structure {\n  rankdir=LR;\n  node [shape=box];\n";
  for (const GraphNode& n : graph.nodes)
    out << "  s" << n.id << " [label=\"" << dot_escape(n.label) << "\"];\n";
  std::vector<GraphEdge> edges = graph.edges;
  std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  char buf[32];
  for (const GraphEdge& e : edges) {
    std::snprintf(buf, sizeof(buf), "%.2f", e.prob);
    out << "  s" << e.from << " -> s" << e.to << " [label=\"" << buf << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

std::string states_to_jsonl(const std::vector<StateRecord>& records) {
  std::string out;
  for (const StateRecord& r : records) {
    nlohmann::ordered_json j{{"dialogue_id", r.dialogue_id}, {"states", r.states}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<StateRecord> parse_states_jsonl(const std::string& text) {
  std::vector<StateRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("dialogue_id").get<std::string>(),
                     j.at("states").get<std::vector<std::size_t>>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("states line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<StateRecord> load_states(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read states file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_states_jsonl(ss.str());
}

void save_states(const std::vector<StateRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write states file " + path.string());
  out << states_to_jsonl(records);
  if (!out) throw IoError("failed writing states file " + path.string());
}

}  // namespace dstruct
