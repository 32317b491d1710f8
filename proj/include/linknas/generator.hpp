#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "linknas/model.hpp"
#include "linknas/space.hpp"

namespace linknas {

// One legal link proposal: from an existing source node either to an
// existing node (new_op empty) or to a brand-new node of kind new_op.
struct CandidateLink {
  int src = 0;
  int dst = -1;               // existing target, or -1 for a new node
  std::optional<Op> new_op;   // set iff the link creates a new node

  bool is_new_node() const { return new_op.has_value(); }
};

// Candidates with their softmax-normalized sampling probabilities.
struct ScorePool {
  std::vector<CandidateLink> candidates;
  std::vector<double> scores;  // raw link scores y in (0, 1)
  std::vector<double> probs;   // softmax(scores), sums to 1
};

// Numerically stable softmax.
std::vector<double> softmax(const std::vector<double>& scores);

// The cross product of src_set with (dst_set + candidate ops), filtered to
// proposals that keep the graph a legal partial cell: no self-loops or
// duplicate edges, no cycles, nothing out of an output or into an input, at
// most one output node, and no new nodes once the vertex budget is reached.
std::vector<CandidateLink> enumerate_candidates(const CellGraph& graph,
                                                const SearchSpaceSpec& spec,
                                                const std::vector<int>& src_set,
                                                const std::vector<int>& dst_set);

// Scores every candidate with the model. A new-node candidate is scored by
// appending a provisional isolated node of its kind and scoring the link
// into it; the provisional node is then discarded.
ScorePool score_candidates(const BiGatModel& model, const CellGraph& graph,
                           const std::vector<CandidateLink>& candidates);

struct GenerateOptions {
  // Uniform sampling over candidates instead of model scores; the random
  // baseline arm of the evaluation protocol.
  bool uniform_baseline = false;
  int max_attempts = 100;
};

// Grows a cell from a lone input node by repeatedly sampling one candidate
// link from the softmax score pool until the edge budget is spent. The final
// link is restricted to creating the output node if none exists yet; if an
// attempt still ends incomplete, the next derived seed retries (bounded by
// max_attempts). Throws when every attempt gets stuck.
CellGraph generate(const BiGatModel& model, const SearchSpaceSpec& spec, uint64_t seed,
                   const GenerateOptions& options = {});

}  // namespace linknas
