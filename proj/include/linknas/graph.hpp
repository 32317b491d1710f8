#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "linknas/mat.hpp"

namespace linknas {

// Operation vocabulary of the NAS-Bench-101 cell space. The enum order fixes
// the one-hot feature layout, so D == kNumOps == 5.
enum class Op : uint8_t {
  kInput = 0,
  kOutput = 1,
  kConv3x3 = 2,
  kConv1x1 = 3,
  kMaxPool3x3 = 4,
};

inline constexpr int kNumOps = 5;

const char* op_name(Op op);
std::optional<Op> op_from_name(const std::string& name);

// A cell: a DAG of typed operation nodes with a dense adjacency matrix.
// adj(i, j) == 1 means a directed edge i -> j.
struct CellGraph {
  int num_nodes = 0;
  std::vector<Op> ops;
  std::vector<uint8_t> adj;  // num_nodes * num_nodes, row-major

  CellGraph() = default;
  explicit CellGraph(std::vector<Op> node_ops)
      : num_nodes(static_cast<int>(node_ops.size())),
        ops(std::move(node_ops)),
        adj(static_cast<size_t>(num_nodes) * num_nodes, 0) {}

  uint8_t at(int i, int j) const { return adj[static_cast<size_t>(i) * num_nodes + j]; }
  void set(int i, int j, uint8_t v) { adj[static_cast<size_t>(i) * num_nodes + j] = v; }

  int count_edges() const;
  std::vector<std::pair<int, int>> edges() const;

  // Appends an isolated node of the given kind, returns its index.
  int add_node(Op op);

  bool has_op(Op op) const;
  int find_op(Op op) const;  // first index with that kind, -1 if absent

  bool operator==(const CellGraph& o) const {
    return num_nodes == o.num_nodes && ops == o.ops && adj == o.adj;
  }
};

// Outcome of validate(): ok iff no invariant is violated; violations lists
// every broken invariant in a human-readable form.
struct Verdict {
  bool ok = true;
  std::vector<std::string> violations;
};

struct ValidateOptions {
  // The NAS-Bench-101 space allows a single input node. The DARTS node-form
  // space has two positional input kinds, so it validates with max_inputs=2.
  int max_inputs = 1;
  int max_outputs = 1;
};

Verdict validate(const CellGraph& graph, const ValidateOptions& opts = {});

// True if j is reachable from i along directed edges.
bool reachable(const CellGraph& graph, int i, int j);

// A complete cell has one input, one output, and the output reachable from
// the input; partial cells during generation may lack the output.
bool is_complete(const CellGraph& graph);

// One-hot node features plus the adjacency and its transpose, with flat
// neighbor lists (in-neighbors plus self) precomputed for the model.
struct EncodedGraph {
  int n = 0;
  Mat features;                    // n x kNumOps, one-hot rows
  std::vector<uint8_t> adj;          // copy of the graph adjacency
  std::vector<uint8_t> feedback_adj;  // exact transpose of adj

  // Flattened neighborhoods: node i's entries are nbr[off[i]..off[i+1]).
  // "in" lists {j : adj(j,i)=1} + {i}; "out" lists {j : adj(i,j)=1} + {i}.
  std::vector<int> in_off, in_nbr;
  std::vector<int> out_off, out_nbr;

  uint8_t adj_at(int i, int j) const { return adj[static_cast<size_t>(i) * n + j]; }
  uint8_t feedback_at(int i, int j) const { return feedback_adj[static_cast<size_t>(i) * n + j]; }
};

// Throws std::runtime_error naming the offending kind if an op is outside
// the 5-kind vocabulary (cannot happen with the Op enum itself, but guards
// future space extensions at the type boundary).
EncodedGraph encode(const CellGraph& graph);

// Appends one isolated node of the given kind to an encoding; used to score
// links into nodes that do not exist yet.
EncodedGraph extend_with_isolated(const EncodedGraph& enc, Op op);

// Inverse of encode: recovers ops from the one-hot rows and copies adj back.
CellGraph decode(const EncodedGraph& enc);

// Exact canonical byte string: equal iff two graphs are isomorphic under an
// op-preserving relabeling. Brute force over all N! relabelings; N <= 7
// keeps that at 5040 permutations. Throws on larger graphs.
std::string canonical_form(const CellGraph& graph);

inline constexpr int kCanonicalMaxNodes = 7;

// Canonical form of a graph with one marked ordered pair. The mark is folded
// into the search so two marked graphs collide iff some op-preserving
// relabeling maps graph to graph and mark to mark.
std::string canonical_form_marked(const CellGraph& graph, int src, int dst);

// Deterministic topological order (ties broken by ascending node index).
// Throws std::runtime_error listing one cycle if the graph is cyclic.
std::vector<int> topological_order(const CellGraph& graph);

}  // namespace linknas
