#include "linknas/synth.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace linknas {

PlantedOracle default_oracle() {
  PlantedOracle o;
  o.beneficial_edges = {
      {Op::kInput, Op::kConv3x3},
      {Op::kConv3x3, Op::kConv3x3},
      {Op::kConv1x1, Op::kConv3x3},
      {Op::kConv3x3, Op::kOutput},
  };
  o.detrimental_edges = {
      {Op::kInput, Op::kMaxPool3x3},
      {Op::kMaxPool3x3, Op::kMaxPool3x3},
      {Op::kMaxPool3x3, Op::kOutput},
  };
  return o;
}

int count_pattern_instances(const CellGraph& cell,
                            const std::vector<std::pair<Op, Op>>& patterns) {
  int count = 0;
  for (auto [u, v] : cell.edges()) {
    for (const auto& p : patterns) {
      if (cell.ops[u] == p.first && cell.ops[v] == p.second) {
        ++count;
        break;
      }
    }
  }
  return count;
}

double oracle_true_accuracy(const PlantedOracle& oracle, const CellGraph& cell) {
  const double acc = oracle.base_acc +
                     oracle.bonus * count_pattern_instances(cell, oracle.beneficial_edges) -
                     oracle.penalty * count_pattern_instances(cell, oracle.detrimental_edges);
  return std::min(1.0, std::max(0.0, acc));
}

double oracle_noisy_accuracy(const PlantedOracle& oracle, const CellGraph& cell, Rng& noise) {
  const double acc = oracle_true_accuracy(oracle, cell) + noise.normal(0.0, oracle.noise_sd);
  return std::min(1.0, std::max(0.0, acc));
}

CellGraph random_valid_cell(const SearchSpaceSpec& spec, Rng& rng) {
  // Interior ops are the candidate set minus the output kind.
  std::vector<Op> interior;
  for (Op op : spec.candidate_ops)
    if (op != Op::kOutput && op != Op::kInput) interior.push_back(op);
  if (interior.empty()) throw std::runtime_error("random_valid_cell: no interior ops");

  for (;;) {
    const int n = 2 + static_cast<int>(rng.below(spec.max_vertices - 1));
    std::vector<Op> ops(n);
    ops.front() = Op::kInput;
    ops.back() = Op::kOutput;
    for (int i = 1; i + 1 < n; ++i) ops[i] = interior[rng.below(interior.size())];
    CellGraph cell(std::move(ops));
    // Upper-triangular edges keep the draw acyclic and the degree rules
    // automatic (node 0 gets no in-edges, node n-1 no out-edges).
    const double density = rng.uniform(0.25, 0.9);
    int edges = 0;
    for (int i = 0; i < n && edges <= spec.max_edges; ++i) {
      for (int j = i + 1; j < n && edges <= spec.max_edges; ++j) {
        if (rng.uniform() < density) {
          cell.set(i, j, 1);
          ++edges;
        }
      }
    }
    if (edges == 0 || edges > spec.max_edges) continue;
    if (!is_complete(cell)) continue;
    return cell;
  }
}

std::vector<ArchRecord> synth_records(const PlantedOracle& oracle, int n_records) {
  if (n_records < 1) throw std::runtime_error("synth_records: n_records must be >= 1");
  const SearchSpaceSpec spec = nasbench101_space();
  const Rng root(oracle.seed);
  Rng cell_rng = root.derive(10);
  std::vector<ArchRecord> records;
  std::unordered_set<std::string> seen;
  while (static_cast<int>(records.size()) < n_records) {
    CellGraph cell = random_valid_cell(spec, cell_rng);
    if (!seen.insert(canonical_form(cell)).second) continue;
    Rng noise = root.derive(20).derive(records.size());
    const double acc = oracle_noisy_accuracy(oracle, cell, noise);
    records.push_back({std::move(cell), acc});
  }
  return records;
}

void synth_benchmark(const PlantedOracle& oracle, int n_records, const std::string& path) {
  save_benchmark(synth_records(oracle, n_records), path);
}

}  // namespace linknas
