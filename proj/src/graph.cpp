#include "linknas/graph.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace linknas {

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kOutput: return "output";
    case Op::kConv3x3: return "conv3x3-bn-relu";
    case Op::kConv1x1: return "conv1x1-bn-relu";
    case Op::kMaxPool3x3: return "maxpool3x3";
  }
  return "?";
}

std::optional<Op> op_from_name(const std::string& name) {
  for (int k = 0; k < kNumOps; ++k) {
    const Op op = static_cast<Op>(k);
    if (name == op_name(op)) return op;
  }
  return std::nullopt;
}

int CellGraph::count_edges() const {
  int e = 0;
  for (uint8_t b : adj) e += b;
  return e;
}

std::vector<std::pair<int, int>> CellGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < num_nodes; ++i)
    for (int j = 0; j < num_nodes; ++j)
      if (at(i, j)) out.emplace_back(i, j);
  return out;
}

int CellGraph::add_node(Op op) {
  const int n = num_nodes;
  std::vector<uint8_t> grown(static_cast<size_t>(n + 1) * (n + 1), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) grown[static_cast<size_t>(i) * (n + 1) + j] = at(i, j);
  adj = std::move(grown);
  ops.push_back(op);
  num_nodes = n + 1;
  return n;
}

bool CellGraph::has_op(Op op) const { return find_op(op) >= 0; }

int CellGraph::find_op(Op op) const {
  for (int i = 0; i < num_nodes; ++i)
    if (ops[i] == op) return i;
  return -1;
}

namespace {

// Kahn's algorithm with min-index tie-break. Returns nullopt on a cycle.
std::optional<std::vector<int>> try_topological_order(const CellGraph& g) {
  const int n = g.num_nodes;
  std::vector<int> indeg(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (g.at(i, j)) ++indeg[j];
  std::vector<int> order;
  std::vector<bool> done(n, false);
  for (int step = 0; step < n; ++step) {
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (!done[i] && indeg[i] == 0) {
        pick = i;
        break;
      }
    }
    if (pick < 0) return std::nullopt;
    done[pick] = true;
    order.push_back(pick);
    for (int j = 0; j < n; ++j)
      if (g.at(pick, j)) --indeg[j];
  }
  return order;
}

// Walks back-edges from an unfinished node to print one cycle.
std::string find_one_cycle(const CellGraph& g) {
  const int n = g.num_nodes;
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<int> stack;
  std::string cycle;
  std::function<bool(int)> dfs = [&](int u) -> bool {
    state[u] = 1;
    stack.push_back(u);
    for (int v = 0; v < n; ++v) {
      if (!g.at(u, v)) continue;
      if (state[v] == 1) {
        std::ostringstream os;
        auto it = std::find(stack.begin(), stack.end(), v);
        for (; it != stack.end(); ++it) os << *it << "->";
        os << v;
        cycle = os.str();
        return true;
      }
      if (state[v] == 0 && dfs(v)) return true;
    }
    state[u] = 2;
    stack.pop_back();
    return false;
  };
  for (int u = 0; u < n; ++u)
    if (state[u] == 0 && dfs(u)) break;
  return cycle;
}

}  // namespace

Verdict validate(const CellGraph& graph, const ValidateOptions& opts) {
  Verdict v;
  const int n = graph.num_nodes;
  if (static_cast<int>(graph.ops.size()) != n ||
      graph.adj.size() != static_cast<size_t>(n) * n) {
    v.ok = false;
    v.violations.push_back("inconsistent dimensions");
    return v;
  }
  for (int i = 0; i < n; ++i) {
    if (graph.at(i, i)) {
      v.ok = false;
      v.violations.push_back("self-loop at node " + std::to_string(i));
    }
  }
  if (!try_topological_order(graph).has_value()) {
    v.ok = false;
    v.violations.push_back("cycle: " + find_one_cycle(graph));
  }
  int inputs = 0, outputs = 0;
  for (int i = 0; i < n; ++i) {
    if (graph.ops[i] == Op::kInput) ++inputs;
    if (graph.ops[i] == Op::kOutput) ++outputs;
  }
  if (inputs > opts.max_inputs) {
    v.ok = false;
    v.violations.push_back("more than " + std::to_string(opts.max_inputs) + " input node(s)");
  }
  if (outputs > opts.max_outputs) {
    v.ok = false;
    v.violations.push_back("more than " + std::to_string(opts.max_outputs) + " output node(s)");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!graph.at(i, j)) continue;
      if (graph.ops[i] == Op::kOutput) {
        v.ok = false;
        v.violations.push_back("output node " + std::to_string(i) + " has outgoing edge to " +
                               std::to_string(j));
      }
      if (graph.ops[j] == Op::kInput) {
        v.ok = false;
        v.violations.push_back("input node " + std::to_string(j) + " has incoming edge from " +
                               std::to_string(i));
      }
    }
  }
  return v;
}

bool reachable(const CellGraph& graph, int i, int j) {
  if (i == j) return true;
  const int n = graph.num_nodes;
  std::vector<bool> seen(n, false);
  std::vector<int> stack{i};
  seen[i] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < n; ++v) {
      if (graph.at(u, v) && !seen[v]) {
        if (v == j) return true;
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return false;
}

bool is_complete(const CellGraph& graph) {
  if (!validate(graph).ok) return false;
  int in_idx = -1, out_idx = -1, inputs = 0, outputs = 0;
  for (int i = 0; i < graph.num_nodes; ++i) {
    if (graph.ops[i] == Op::kInput) {
      in_idx = i;
      ++inputs;
    }
    if (graph.ops[i] == Op::kOutput) {
      out_idx = i;
      ++outputs;
    }
  }
  if (inputs != 1 || outputs != 1) return false;
  return reachable(graph, in_idx, out_idx);
}

EncodedGraph encode(const CellGraph& graph) {
  const int n = graph.num_nodes;
  EncodedGraph e;
  e.n = n;
  e.features.resize(n, kNumOps);
  for (int i = 0; i < n; ++i) {
    const int k = static_cast<int>(graph.ops[i]);
    if (k < 0 || k >= kNumOps)
      throw std::runtime_error("encode: unknown operation kind id " + std::to_string(k));
    e.features(i, k) = 1.0;
  }
  e.adj = graph.adj;
  e.feedback_adj.assign(static_cast<size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) e.feedback_adj[static_cast<size_t>(j) * n + i] = graph.at(i, j);

  e.in_off.assign(n + 1, 0);
  e.out_off.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    int in_count = 1, out_count = 1;  // self-loop in both directions
    for (int j = 0; j < n; ++j) {
      if (graph.at(j, i)) ++in_count;
      if (graph.at(i, j)) ++out_count;
    }
    e.in_off[i + 1] = e.in_off[i] + in_count;
    e.out_off[i + 1] = e.out_off[i] + out_count;
  }
  e.in_nbr.resize(e.in_off[n]);
  e.out_nbr.resize(e.out_off[n]);
  for (int i = 0; i < n; ++i) {
    int iw = e.in_off[i], ow = e.out_off[i];
    for (int j = 0; j < n; ++j) {
      if (graph.at(j, i)) e.in_nbr[iw++] = j;
      if (graph.at(i, j)) e.out_nbr[ow++] = j;
    }
    e.in_nbr[iw] = i;
    e.out_nbr[ow] = i;
  }
  return e;
}

EncodedGraph extend_with_isolated(const EncodedGraph& enc, Op op) {
  CellGraph g = decode(enc);
  g.add_node(op);
  return encode(g);
}

CellGraph decode(const EncodedGraph& enc) {
  std::vector<Op> ops(enc.n);
  for (int i = 0; i < enc.n; ++i) {
    int k = -1;
    for (int c = 0; c < kNumOps; ++c)
      if (enc.features(i, c) == 1.0) k = c;
    if (k < 0) throw std::runtime_error("decode: node " + std::to_string(i) + " is not one-hot");
    ops[i] = static_cast<Op>(k);
  }
  CellGraph g(std::move(ops));
  g.adj = enc.adj;
  return g;
}

namespace {

// Serializes a relabeled copy of (ops, labels) under permutation perm, where
// perm[i] is the new index of old node i. labels is a small-int edge matrix
// (0 none, 1 edge, 2 marked pair), so the same search covers marked graphs.
std::string serialize_permuted(const CellGraph& g, const std::vector<uint8_t>& labels,
                               const std::vector<int>& perm) {
  const int n = g.num_nodes;
  std::string s(static_cast<size_t>(1 + n) + static_cast<size_t>(n) * n, '\0');
  s[0] = static_cast<char>(n);
  for (int i = 0; i < n; ++i) s[1 + perm[i]] = static_cast<char>(g.ops[i]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s[1 + n + static_cast<size_t>(perm[i]) * n + perm[j]] =
          static_cast<char>(labels[static_cast<size_t>(i) * n + j]);
  return s;
}

std::string canonical_of_labeled(const CellGraph& g, const std::vector<uint8_t>& labels) {
  const int n = g.num_nodes;
  if (n > kCanonicalMaxNodes)
    throw std::runtime_error("canonical_form: graph has " + std::to_string(n) +
                             " nodes, limit is " + std::to_string(kCanonicalMaxNodes));
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::string best;
  do {
    std::string s = serialize_permuted(g, labels, perm);
    if (best.empty() || s < best) best = std::move(s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

std::string canonical_form(const CellGraph& graph) {
  return canonical_of_labeled(graph, graph.adj);
}

std::string canonical_form_marked(const CellGraph& graph, int src, int dst) {
  std::vector<uint8_t> labels = graph.adj;
  labels[static_cast<size_t>(src) * graph.num_nodes + dst] = 2;
  return canonical_of_labeled(graph, labels);
}

std::vector<int> topological_order(const CellGraph& graph) {
  auto order = try_topological_order(graph);
  if (!order) throw std::runtime_error("topological_order: cycle: " + find_one_cycle(graph));
  return *order;
}

}  // namespace linknas
