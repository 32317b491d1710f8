#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "linknas/graph.hpp"
#include "linknas/rng.hpp"

namespace linknas {

// One benchmark entry: a cell and its measured test accuracy.
struct ArchRecord {
  CellGraph cell;
  double test_accuracy = 0.0;
};

// A link-prediction training example: an incomplete cell with one marked
// ordered pair (src, dst) and a binary label. The marked link is never
// present in the sample graph, and adding it keeps the graph acyclic.
struct TrainingSample {
  CellGraph graph;
  int src = 0;
  int dst = 0;
  int label = 0;

  bool operator==(const TrainingSample& o) const {
    return src == o.src && dst == o.dst && label == o.label && graph == o.graph;
  }
};

struct SampleConfig {
  int k_high = 30;   // top architectures kept for positive construction
  int k_low = 30;    // bottom architectures kept for negative construction
  double disassembly_fraction = 0.5;  // keep probability for disassembly samples
  uint64_t seed = 0;
  bool classic_mode = false;  // plain taken-out-links / absent-links construction
};

// Benchmark JSONL: one object per line with keys "ops", "adj", "test_acc".
// Throws std::runtime_error with the 1-based line number on parse or
// validation failure.
std::vector<ArchRecord> load_benchmark(const std::string& path);
void save_benchmark(const std::vector<ArchRecord>& records, const std::string& path);

// Splits records into the k_high highest-accuracy and k_low lowest-accuracy
// cells. Ties are broken by canonical form so the split is deterministic.
// top is ordered best-first, bottom worst-first.
std::pair<std::vector<ArchRecord>, std::vector<ArchRecord>> rank_and_select(
    const std::vector<ArchRecord>& records, const SampleConfig& config);

// Label-1 samples from the top cells: one per existing edge, plus a seeded
// edge-removal walk down to the empty graph whose steps are each kept with
// probability disassembly_fraction. Duplicates (same marked graph up to
// relabeling, same label) are dropped.
std::vector<TrainingSample> build_positive_samples(const std::vector<ArchRecord>& top,
                                                   const SampleConfig& config);

// Label-0 samples: the positive construction applied to the bottom cells,
// plus every legal absent link of each top cell marked on the intact cell.
// classic_mode keeps only the absent-link part.
std::vector<TrainingSample> build_negative_samples(const std::vector<ArchRecord>& top,
                                                   const std::vector<ArchRecord>& bottom,
                                                   const SampleConfig& config);

// Equalizes class sizes by seeded subsampling of the larger class.
std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> balance(
    std::vector<TrainingSample> pos, std::vector<TrainingSample> neg, uint64_t seed);

// Legal absent links of a cell: ordered non-edges whose insertion keeps the
// cell a valid DAG (no cycle, nothing into an input, nothing out of an
// output). Exactly the pairs generation could ever propose.
std::vector<std::pair<int, int>> legal_absent_links(const CellGraph& cell);

// Sample JSONL: objects with keys "ops", "adj", "src", "dst", "label".
void save_samples(const std::vector<TrainingSample>& samples, const std::string& path);
std::vector<TrainingSample> load_samples(const std::string& path);

// FNV-1a digest of the serialized sample set; stored in checkpoints so a
// model can be matched to the data it was trained on.
std::string sample_digest(const std::vector<TrainingSample>& samples);

}  // namespace linknas
