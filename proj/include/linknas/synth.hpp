#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "linknas/dataset.hpp"
#include "linknas/graph.hpp"
#include "linknas/rng.hpp"
#include "linknas/space.hpp"

namespace linknas {

// Synthetic accuracy rule: a base score plus a bonus per planted beneficial
// edge pattern and a penalty per detrimental one, with Gaussian noise.
// Stands in for a measured benchmark at desk scale.
struct PlantedOracle {
  std::vector<std::pair<Op, Op>> beneficial_edges;
  std::vector<std::pair<Op, Op>> detrimental_edges;
  double base_acc = 0.80;
  double bonus = 0.02;
  double penalty = 0.03;
  double noise_sd = 0.002;
  uint64_t seed = 0;
};

// Convolution-heavy links help, pooling-heavy links hurt.
PlantedOracle default_oracle();

int count_pattern_instances(const CellGraph& cell,
                            const std::vector<std::pair<Op, Op>>& patterns);

// Noise-free planted score of a cell, clamped to [0, 1].
double oracle_true_accuracy(const PlantedOracle& oracle, const CellGraph& cell);

// Planted score with seeded per-call noise (used when scoring benchmark
// records; record construction derives one noise stream per record).
double oracle_noisy_accuracy(const PlantedOracle& oracle, const CellGraph& cell, Rng& noise);

// One uniformly-drawn valid, complete cell of the given space, by rejection
// sampling over node counts, ops, and upper-triangular edges.
CellGraph random_valid_cell(const SearchSpaceSpec& spec, Rng& rng);

// n_records distinct random valid cells scored by the planted rule.
// Deterministic given oracle.seed; cells are distinct up to relabeling.
std::vector<ArchRecord> synth_records(const PlantedOracle& oracle, int n_records);

// Writes synth_records in the benchmark JSONL format.
void synth_benchmark(const PlantedOracle& oracle, int n_records, const std::string& path);

}  // namespace linknas
