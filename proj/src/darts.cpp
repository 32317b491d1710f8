#include "linknas/darts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace linknas {

using nlohmann::json;

const char* darts_op_name(DartsOp op) {
  switch (op) {
    case DartsOp::kSepConv3x3: return "sep_conv_3x3";
    case DartsOp::kSepConv5x5: return "sep_conv_5x5";
    case DartsOp::kDilConv3x3: return "dil_conv_3x3";
    case DartsOp::kDilConv5x5: return "dil_conv_5x5";
    case DartsOp::kMaxPool3x3: return "max_pool_3x3";
    case DartsOp::kAvgPool3x3: return "avg_pool_3x3";
    case DartsOp::kSkipConnect: return "skip_connect";
    case DartsOp::kNone: return "none";
  }
  return "?";
}

std::optional<DartsOp> darts_op_from_name(const std::string& name) {
  for (int k = 0; k < kNumDartsOps; ++k) {
    const DartsOp op = static_cast<DartsOp>(k);
    if (name == darts_op_name(op)) return op;
  }
  return std::nullopt;
}

void normalize(DartsCell& cell) {
  for (auto& node : cell.pairs) {
    for (auto& pair : node)
      if (pair.op == DartsOp::kNone) pair.pred = 0;
    std::sort(node.begin(), node.end(), [](const DartsPair& a, const DartsPair& b) {
      const bool an = a.op == DartsOp::kNone, bn = b.op == DartsOp::kNone;
      if (an != bn) return bn;  // none pairs last
      if (a.pred != b.pred) return a.pred < b.pred;
      return static_cast<int>(a.op) < static_cast<int>(b.op);
    });
  }
}

bool darts_cell_valid(const DartsCell& cell) {
  for (int k = 0; k < kDartsIntermediates; ++k) {
    for (const DartsPair& pair : cell.pairs[k]) {
      if (pair.pred < 0 || pair.pred >= 2 + k) return false;
      if (pair.op == DartsOp::kNone && pair.pred != 0) return false;
    }
  }
  return true;
}

OpMapping default_mapping() {
  OpMapping m;
  m.table[static_cast<int>(DartsOp::kSepConv3x3)] = {Op::kConv3x3};
  m.table[static_cast<int>(DartsOp::kSepConv5x5)] = {Op::kConv3x3, Op::kConv3x3};
  m.table[static_cast<int>(DartsOp::kDilConv3x3)] = {Op::kConv3x3, Op::kConv1x1};
  m.table[static_cast<int>(DartsOp::kDilConv5x5)] = {Op::kConv3x3, Op::kConv3x3, Op::kConv1x1};
  m.table[static_cast<int>(DartsOp::kMaxPool3x3)] = {Op::kMaxPool3x3};
  m.table[static_cast<int>(DartsOp::kAvgPool3x3)] = {Op::kMaxPool3x3};
  m.table[static_cast<int>(DartsOp::kSkipConnect)] = {Op::kConv1x1};
  m.table[static_cast<int>(DartsOp::kNone)] = {};
  return m;
}

OpMapping load_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mapping file: " + path);
  json j;
  in >> j;
  OpMapping m;
  for (int k = 0; k < kNumDartsOps; ++k) {
    const DartsOp op = static_cast<DartsOp>(k);
    const std::string name = darts_op_name(op);
    if (!j.contains(name)) throw std::runtime_error("mapping file misses darts op " + name);
    for (const auto& entry : j.at(name)) {
      auto cell_op = op_from_name(entry.get<std::string>());
      if (!cell_op)
        throw std::runtime_error("mapping for " + name + " uses unknown op \"" +
                                 entry.get<std::string>() + "\"");
      if (*cell_op == Op::kInput || *cell_op == Op::kOutput)
        throw std::runtime_error("mapping for " + name + " may not use input/output kinds");
      m.table[k].push_back(*cell_op);
    }
    if (op != DartsOp::kNone && m.table[k].empty())
      throw std::runtime_error("mapping for " + name + " must be non-empty");
    if (op == DartsOp::kNone && !m.table[k].empty())
      throw std::runtime_error("mapping for none must be empty");
  }
  return m;
}

void save_mapping(const OpMapping& mapping, const std::string& path) {
  json j;
  for (int k = 0; k < kNumDartsOps; ++k) {
    json chain = json::array();
    for (Op op : mapping.table[k]) chain.push_back(op_name(op));
    j[darts_op_name(static_cast<DartsOp>(k))] = std::move(chain);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mapping file: " + path);
  out << j.dump(2) << "\n";
}

namespace {

// Grows the adjacency by one node at a time while building node forms.
struct NodeFormBuilder {
  std::vector<Op> ops;
  std::vector<std::pair<int, int>> edges;

  int add(Op op) {
    ops.push_back(op);
    return static_cast<int>(ops.size()) - 1;
  }

  // Adds the chain pred -> c1 -> ... -> cK and returns the tail index.
  int add_chain(int pred, const std::vector<Op>& chain) {
    int cur = pred;
    for (Op op : chain) {
      const int next = add(op);
      edges.emplace_back(cur, next);
      cur = next;
    }
    return cur;
  }

  CellGraph build() const {
    CellGraph g(ops);
    for (auto [u, v] : edges) g.set(u, v, 1);
    return g;
  }
};

}  // namespace

CellGraph darts_to_nodeform(const DartsCell& cell, const OpMapping& mapping) {
  if (!darts_cell_valid(cell)) throw std::runtime_error("darts_to_nodeform: invalid cell");
  NodeFormBuilder b;
  b.add(Op::kInput);  // cell input 0
  b.add(Op::kInput);  // cell input 1
  std::array<int, kDartsIntermediates> junction{};
  for (int k = 0; k < kDartsIntermediates; ++k) {
    std::vector<int> tails;
    for (const DartsPair& pair : cell.pairs[k]) {
      if (pair.op == DartsOp::kNone) continue;
      const int pred_node = pair.pred < 2 ? pair.pred : junction[pair.pred - 2];
      const auto& chain = mapping.table[static_cast<int>(pair.op)];
      if (chain.empty())
        throw std::runtime_error(std::string("darts_to_nodeform: no mapping for ") +
                                 darts_op_name(pair.op));
      tails.push_back(b.add_chain(pred_node, chain));
    }
    junction[k] = b.add(kJunctionOp);
    for (int tail : tails) b.edges.emplace_back(tail, junction[k]);
  }
  const int output = b.add(Op::kOutput);
  for (int k = 0; k < kDartsIntermediates; ++k) b.edges.emplace_back(junction[k], output);
  return b.build();
}

namespace {

std::optional<DartsOp> reverse_lookup(const OpMapping& mapping, const std::vector<Op>& chain) {
  for (int k = 0; k < kNumDartsOps; ++k) {
    if (static_cast<DartsOp>(k) == DartsOp::kNone) continue;
    if (mapping.table[k] == chain) return static_cast<DartsOp>(k);
  }
  return std::nullopt;
}

}  // namespace

DartsCell nodeform_to_darts(const CellGraph& graph, const OpMapping& mapping) {
  const int n = graph.num_nodes;
  auto fail = [](const std::string& why) -> DartsCell {
    throw std::runtime_error("nodeform_to_darts: " + why);
  };

  int output = -1;
  for (int i = 0; i < n; ++i) {
    if (graph.ops[i] == Op::kOutput) {
      if (output >= 0) return fail("more than one output node");
      output = i;
    }
  }
  if (output < 0) return fail("no output node");

  std::vector<int> junctions;
  for (int i = 0; i < n; ++i)
    if (graph.at(i, output)) junctions.push_back(i);
  std::sort(junctions.begin(), junctions.end());
  if (junctions.size() != static_cast<size_t>(kDartsIntermediates))
    return fail("output must collect exactly " + std::to_string(kDartsIntermediates) +
                " junctions, found " + std::to_string(junctions.size()));

  // Node classification for the chain walks.
  std::vector<int> pred_id(n, -1);  // darts predecessor id, -1 for plain nodes
  int input_count = 0;
  for (int i = 0; i < n; ++i) {
    if (graph.ops[i] == Op::kInput) {
      if (input_count >= 2) return fail("more than two input nodes");
      pred_id[i] = input_count++;
    }
  }
  if (input_count != 2) return fail("expected two input nodes");
  for (size_t k = 0; k < junctions.size(); ++k) {
    if (graph.ops[junctions[k]] != kJunctionOp)
      return fail("junction node " + std::to_string(junctions[k]) + " has kind " +
                  op_name(graph.ops[junctions[k]]) + ", expected " + op_name(kJunctionOp));
    pred_id[junctions[k]] = 2 + static_cast<int>(k);
  }

  std::vector<int> in_deg(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (graph.at(i, j)) ++in_deg[j];

  std::vector<bool> consumed(n, false);
  consumed[output] = true;
  for (int i = 0; i < n; ++i)
    if (pred_id[i] >= 0) consumed[i] = true;

  DartsCell cell;
  for (int k = 0; k < kDartsIntermediates; ++k) {
    const int j = junctions[k];
    std::vector<int> tails;
    for (int i = 0; i < n; ++i)
      if (graph.at(i, j)) tails.push_back(i);
    if (tails.size() > static_cast<size_t>(kDartsPairsPerNode))
      return fail("junction " + std::to_string(j) + " has " + std::to_string(tails.size()) +
                  " incoming chains, at most " + std::to_string(kDartsPairsPerNode) +
                  " allowed");
    int slot = 0;
    for (int tail : tails) {
      std::vector<Op> chain;
      int cur = tail;
      while (pred_id[cur] < 0) {
        if (consumed[cur]) return fail("node " + std::to_string(cur) + " shared by two chains");
        consumed[cur] = true;
        chain.push_back(graph.ops[cur]);
        if (in_deg[cur] != 1)
          return fail("chain node " + std::to_string(cur) + " has in-degree " +
                      std::to_string(in_deg[cur]));
        int prev = -1;
        for (int p = 0; p < n; ++p)
          if (graph.at(p, cur)) prev = p;
        cur = prev;
      }
      if (pred_id[cur] >= 2 + k) return fail("chain predecessor is not strictly earlier");
      std::reverse(chain.begin(), chain.end());
      const auto op = reverse_lookup(mapping, chain);
      if (!op) {
        std::ostringstream os;
        os << "unmapped chain [";
        for (size_t c = 0; c < chain.size(); ++c) os << (c ? " " : "") << op_name(chain[c]);
        os << "]";
        return fail(os.str());
      }
      cell.pairs[k][slot++] = {pred_id[cur], *op};
    }
    for (; slot < kDartsPairsPerNode; ++slot) cell.pairs[k][slot] = {0, DartsOp::kNone};
  }
  for (int i = 0; i < n; ++i)
    if (!consumed[i]) return fail("stray node " + std::to_string(i));
  normalize(cell);
  return cell;
}

DartsCell random_darts_cell(Rng& rng, const std::vector<DartsOp>& op_choices) {
  if (op_choices.empty()) throw std::runtime_error("random_darts_cell: no op choices");
  DartsCell cell;
  for (int k = 0; k < kDartsIntermediates; ++k) {
    for (int s = 0; s < kDartsPairsPerNode; ++s) {
      const DartsOp op = op_choices[rng.below(op_choices.size())];
      const int pred =
          op == DartsOp::kNone ? 0 : static_cast<int>(rng.below(static_cast<uint64_t>(2 + k)));
      cell.pairs[k][s] = {pred, op};
    }
  }
  normalize(cell);
  return cell;
}

std::vector<DartsOp> decode_canonical_ops(const OpMapping& mapping) {
  std::vector<DartsOp> ops;
  for (int k = 0; k < kNumDartsOps; ++k) {
    const DartsOp op = static_cast<DartsOp>(k);
    if (op == DartsOp::kNone) continue;
    if (reverse_lookup(mapping, mapping.table[k]) == op) ops.push_back(op);
  }
  return ops;
}

DartsCell generate_darts(const BiGatModel& model, uint64_t seed, const OpMapping& mapping,
                         const GenerateOptions& options) {
  Rng rng = Rng(seed).derive(6);
  // Node form under construction; chains are placed two per intermediate.
  NodeFormBuilder b;
  b.add(Op::kInput);
  b.add(Op::kInput);
  std::vector<int> pred_nodes{0, 1};  // node index of darts predecessor p

  DartsCell cell;
  for (int k = 0; k < kDartsIntermediates; ++k) {
    int junction = -1;
    for (int slot = 0; slot < kDartsPairsPerNode; ++slot) {
      CellGraph current = b.build();
      const EncodedGraph enc = encode(current);
      struct Composite {
        int pred;
        DartsOp op;
      };
      std::vector<Composite> composites;
      std::vector<double> scores;
      Mat extended_embed[kNumOps];
      bool have_extended[kNumOps] = {};
      for (int p = 0; p < static_cast<int>(pred_nodes.size()); ++p) {
        for (int o = 0; o < kNumDartsOps; ++o) {
          const DartsOp op = static_cast<DartsOp>(o);
          if (op == DartsOp::kNone) continue;  // every junction takes two real edges
          composites.push_back({p, op});
          if (!options.uniform_baseline) {
            const Op head = mapping.table[o].front();
            const int h = static_cast<int>(head);
            if (!have_extended[h]) {
              extended_embed[h] = bi_embed(model, extend_with_isolated(enc, head));
              have_extended[h] = true;
            }
            scores.push_back(
                score_link(model, extended_embed[h], pred_nodes[p], current.num_nodes));
          }
        }
      }
      int pick;
      if (options.uniform_baseline) {
        pick = static_cast<int>(rng.below(composites.size()));
      } else {
        pick = rng.sample_discrete(softmax(scores));
      }
      const Composite chosen = composites[pick];
      const int tail =
          b.add_chain(pred_nodes[chosen.pred], mapping.table[static_cast<int>(chosen.op)]);
      if (junction < 0) junction = b.add(kJunctionOp);
      b.edges.emplace_back(tail, junction);
      cell.pairs[k][slot] = {chosen.pred, chosen.op};
    }
    pred_nodes.push_back(junction);
  }
  normalize(cell);
  return cell;
}

DartsGenotype generate_darts_genotype(const BiGatModel& model, uint64_t seed,
                                      const OpMapping& mapping,
                                      const GenerateOptions& options) {
  const Rng root(seed);
  DartsGenotype g;
  g.normal = generate_darts(model, root.derive(0).seed(), mapping, options);
  g.reduce = generate_darts(model, root.derive(1).seed(), mapping, options);
  return g;
}

namespace {

void cell_to_text(std::ostream& os, const DartsCell& cell) {
  os << "[";
  bool first = true;
  for (const auto& node : cell.pairs) {
    for (const DartsPair& pair : node) {
      if (!first) os << ", ";
      first = false;
      os << "(" << darts_op_name(pair.op) << ", " << pair.pred << ")";
    }
  }
  os << "]";
}

DartsCell cell_from_text(const std::string& text, size_t& pos) {
  auto expect = [&](char c) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size() || text[pos] != c)
      throw std::runtime_error("genotype parse error at position " + std::to_string(pos) +
                               ": expected '" + std::string(1, c) + "'");
    ++pos;
  };
  DartsCell cell;
  expect('[');
  for (int k = 0; k < kDartsIntermediates; ++k) {
    for (int s = 0; s < kDartsPairsPerNode; ++s) {
      if (k || s) expect(',');
      expect('(');
      while (pos < text.size() && text[pos] == ' ') ++pos;
      size_t end = text.find(',', pos);
      if (end == std::string::npos) throw std::runtime_error("genotype parse error: bad pair");
      const std::string name = text.substr(pos, end - pos);
      const auto op = darts_op_from_name(name);
      if (!op) throw std::runtime_error("genotype parse error: unknown op \"" + name + "\"");
      pos = end + 1;
      while (pos < text.size() && text[pos] == ' ') ++pos;
      size_t used = 0;
      const int pred = std::stoi(text.substr(pos), &used);
      pos += used;
      expect(')');
      cell.pairs[k][s] = {pred, *op};
    }
  }
  expect(']');
  return cell;
}

}  // namespace

std::string genotype_to_text(const DartsGenotype& genotype) {
  std::ostringstream os;
  os << "normal=";
  cell_to_text(os, genotype.normal);
  os << " reduce=";
  cell_to_text(os, genotype.reduce);
  return os.str();
}

DartsGenotype genotype_from_text(const std::string& text) {
  const std::string normal_tag = "normal=";
  const std::string reduce_tag = "reduce=";
  size_t npos = text.find(normal_tag);
  size_t rpos = text.find(reduce_tag);
  if (npos == std::string::npos || rpos == std::string::npos)
    throw std::runtime_error("genotype parse error: missing normal=/reduce= sections");
  DartsGenotype g;
  size_t pos = npos + normal_tag.size();
  g.normal = cell_from_text(text, pos);
  pos = rpos + reduce_tag.size();
  g.reduce = cell_from_text(text, pos);
  return g;
}

}  // namespace linknas
