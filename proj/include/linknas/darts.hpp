#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "linknas/generator.hpp"
#include "linknas/graph.hpp"
#include "linknas/model.hpp"

namespace linknas {

enum class DartsOp : uint8_t {
  kSepConv3x3 = 0,
  kSepConv5x5 = 1,
  kDilConv3x3 = 2,
  kDilConv5x5 = 3,
  kMaxPool3x3 = 4,
  kAvgPool3x3 = 5,
  kSkipConnect = 6,
  kNone = 7,
};

inline constexpr int kNumDartsOps = 8;
inline constexpr int kDartsIntermediates = 4;
inline constexpr int kDartsPairsPerNode = 2;

const char* darts_op_name(DartsOp op);
std::optional<DartsOp> darts_op_from_name(const std::string& name);

// One input edge of an intermediate node: predecessor 0/1 are the two cell
// inputs, 2+k is intermediate k. A none pair stands for an absent edge and
// is normalized to predecessor 0.
struct DartsPair {
  int pred = 0;
  DartsOp op = DartsOp::kNone;

  bool operator==(const DartsPair& o) const { return pred == o.pred && op == o.op; }
};

struct DartsCell {
  std::array<std::array<DartsPair, kDartsPairsPerNode>, kDartsIntermediates> pairs;

  bool operator==(const DartsCell& o) const { return pairs == o.pairs; }
};

// Canonical pair order per intermediate (none pairs last, then by
// predecessor and op); the two in-edges of a node carry no order in the
// graph form, so equality is defined on normalized cells.
void normalize(DartsCell& cell);

// Each predecessor strictly earlier than its node; none pairs at pred 0.
bool darts_cell_valid(const DartsCell& cell);

// Per-darts-op chains of cell-space ops with the same receptive field; a
// none entry is empty (the edge simply does not exist in node form).
struct OpMapping {
  std::array<std::vector<Op>, kNumDartsOps> table;
};

OpMapping default_mapping();
OpMapping load_mapping(const std::string& path);  // JSON {darts_op: [op names]}
void save_mapping(const OpMapping& mapping, const std::string& path);

// The junction standing in for an intermediate node's edge-sum in node form.
inline constexpr Op kJunctionOp = Op::kConv1x1;

// Node form: both cell inputs become input-kind source nodes, each non-none
// pair becomes its mapped op chain feeding the intermediate's shared
// junction, and all four junctions feed the output (concatenation) node.
CellGraph darts_to_nodeform(const DartsCell& cell, const OpMapping& mapping);

// Inverse of darts_to_nodeform: classifies nodes structurally (junctions
// are the output's in-neighbors), walks each chain back to its predecessor,
// and reverse-maps the op sequence. Throws on unrecognizable structure,
// including more than two chains into one junction. When two darts ops map
// to the same chain the earlier one in the vocabulary wins.
DartsCell nodeform_to_darts(const CellGraph& graph, const OpMapping& mapping);

// Uniformly random valid cell over the given op choices (normalized).
DartsCell random_darts_cell(Rng& rng, const std::vector<DartsOp>& op_choices);

// The darts ops that survive a nodeform round-trip under this mapping, i.e.
// each is the first op in vocabulary order with its chain.
std::vector<DartsOp> decode_canonical_ops(const OpMapping& mapping);

// Grows one cell in node form with the cell-space-trained model: for each
// intermediate in order, two chain placements are sampled from the softmax
// pool over (predecessor, darts op) composites. A composite is scored as
// the link from the predecessor into a provisional node carrying the
// chain's first op. Exactly 8 genotype edges; none is never placed.
DartsCell generate_darts(const BiGatModel& model, uint64_t seed, const OpMapping& mapping,
                         const GenerateOptions& options = {});

struct DartsGenotype {
  DartsCell normal;
  DartsCell reduce;

  bool operator==(const DartsGenotype& o) const {
    return normal == o.normal && reduce == o.reduce;
  }
};

// Normal and reduction cells from derived seeds of one invocation.
DartsGenotype generate_darts_genotype(const BiGatModel& model, uint64_t seed,
                                      const OpMapping& mapping,
                                      const GenerateOptions& options = {});

// Text form `normal=[(op, pred), ...] reduce=[(op, pred), ...]` with the 8
// pairs of each cell listed node by node.
std::string genotype_to_text(const DartsGenotype& genotype);
DartsGenotype genotype_from_text(const std::string& text);

}  // namespace linknas
