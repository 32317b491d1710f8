#pragma once

#include <vector>

#include "linknas/graph.hpp"

namespace linknas {

// Structural budget of a cell search space: edge budget E, vertex budget V,
// and the op kinds a generated link may introduce as a brand-new node.
// Acyclicity, uniqueness of edges, and input/output degree rules always hold.
struct SearchSpaceSpec {
  int max_edges = 9;
  int max_vertices = 7;
  std::vector<Op> candidate_ops;  // never contains kInput
};

inline SearchSpaceSpec nasbench101_space() {
  return SearchSpaceSpec{
      .max_edges = 9,
      .max_vertices = 7,
      .candidate_ops = {Op::kConv3x3, Op::kConv1x1, Op::kMaxPool3x3, Op::kOutput},
  };
}

}  // namespace linknas
