#include "linknas/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "linknas/rng.hpp"

namespace linknas {

std::vector<double> softmax(const std::vector<double>& scores) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> probs(scores.size());
  double denom = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - mx);
    denom += probs[i];
  }
  for (double& p : probs) p /= denom;
  return probs;
}

std::vector<CandidateLink> enumerate_candidates(const CellGraph& graph,
                                                const SearchSpaceSpec& spec,
                                                const std::vector<int>& src_set,
                                                const std::vector<int>& dst_set) {
  std::vector<CandidateLink> out;
  const bool have_output = graph.has_op(Op::kOutput);
  const bool can_add_node = graph.num_nodes < spec.max_vertices;
  for (int i : src_set) {
    if (graph.ops[i] == Op::kOutput) continue;  // nothing may leave an output
    for (int j : dst_set) {
      if (i == j || graph.at(i, j)) continue;
      if (graph.ops[j] == Op::kInput) continue;  // nothing may enter an input
      if (reachable(graph, j, i)) continue;      // would close a cycle
      out.push_back({i, j, std::nullopt});
    }
    if (!can_add_node) continue;  // "Remove OP" once the vertex budget is hit
    for (Op op : spec.candidate_ops) {
      if (op == Op::kInput) continue;  // the single input exists from the start
      if (op == Op::kOutput && have_output) continue;
      out.push_back({i, -1, op});
    }
  }
  return out;
}

ScorePool score_candidates(const BiGatModel& model, const CellGraph& graph,
                           const std::vector<CandidateLink>& candidates) {
  if (candidates.empty()) throw std::runtime_error("score_candidates: no candidates");
  ScorePool pool;
  pool.candidates = candidates;
  pool.scores.resize(candidates.size());

  const EncodedGraph enc = encode(graph);
  Mat base_embed;
  bool have_base = false;
  // A provisional isolated node leaves existing neighborhoods untouched, so
  // one extended embedding per distinct new-node kind covers all sources.
  Mat extended_embed[kNumOps];
  bool have_extended[kNumOps] = {};

  for (size_t c = 0; c < candidates.size(); ++c) {
    const CandidateLink& cand = candidates[c];
    if (cand.is_new_node()) {
      const int k = static_cast<int>(*cand.new_op);
      if (!have_extended[k]) {
        extended_embed[k] = bi_embed(model, extend_with_isolated(enc, *cand.new_op));
        have_extended[k] = true;
      }
      pool.scores[c] = score_link(model, extended_embed[k], cand.src, graph.num_nodes);
    } else {
      if (!have_base) {
        base_embed = bi_embed(model, enc);
        have_base = true;
      }
      pool.scores[c] = score_link(model, base_embed, cand.src, cand.dst);
    }
  }
  pool.probs = softmax(pool.scores);
  return pool;
}

namespace {

void insert_sorted(std::vector<int>& set, int v) {
  auto it = std::lower_bound(set.begin(), set.end(), v);
  if (it == set.end() || *it != v) set.insert(it, v);
}

// One growth attempt; nullopt when it gets stuck or ends incomplete.
std::optional<CellGraph> try_generate(const BiGatModel& model, const SearchSpaceSpec& spec,
                                      Rng rng, const GenerateOptions& options) {
  CellGraph graph({Op::kInput});
  std::vector<int> src_set{0};
  std::vector<int> dst_set;
  int edges = 0;
  while (edges < spec.max_edges) {
    std::vector<CandidateLink> candidates = enumerate_candidates(graph, spec, src_set, dst_set);
    if (candidates.empty()) {
      if (is_complete(graph)) return graph;  // saturated early
      return std::nullopt;
    }
    // Spending the last edge without an output strands the cell, so the
    // final pick is restricted to candidates that create one.
    if (edges == spec.max_edges - 1 && !graph.has_op(Op::kOutput)) {
      std::vector<CandidateLink> finishing;
      for (const CandidateLink& c : candidates)
        if (c.is_new_node() && *c.new_op == Op::kOutput) finishing.push_back(c);
      if (finishing.empty()) return std::nullopt;
      candidates = std::move(finishing);
    }

    int pick;
    if (options.uniform_baseline) {
      pick = static_cast<int>(rng.below(candidates.size()));
    } else {
      const ScorePool pool = score_candidates(model, graph, candidates);
      pick = rng.sample_discrete(pool.probs);
    }
    const CandidateLink& chosen = candidates[pick];
    int endpoint = chosen.dst;
    if (chosen.is_new_node()) {
      endpoint = graph.add_node(*chosen.new_op);
    }
    graph.set(chosen.src, endpoint, 1);
    insert_sorted(src_set, endpoint);
    insert_sorted(dst_set, endpoint);
    ++edges;
  }
  if (is_complete(graph)) return graph;
  return std::nullopt;
}

}  // namespace

CellGraph generate(const BiGatModel& model, const SearchSpaceSpec& spec, uint64_t seed,
                   const GenerateOptions& options) {
  const Rng root(seed);
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    auto graph = try_generate(model, spec, root.derive(attempt), options);
    if (graph) return *graph;
  }
  throw std::runtime_error("generate: stuck after " + std::to_string(options.max_attempts) +
                           " attempts (seed " + std::to_string(seed) + ")");
}

}  // namespace linknas
