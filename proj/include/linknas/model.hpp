#pragma once

#include <array>
#include <string>
#include <vector>

#include "linknas/graph.hpp"
#include "linknas/mat.hpp"
#include "linknas/rng.hpp"

namespace linknas {

inline constexpr int kFeatureDim = 5;    // one-hot op width
inline constexpr int kHiddenDim = 16;    // GAT hidden and output width
inline constexpr int kEmbedDim = 32;     // concatenated node embedding width
inline constexpr int kMlpHiddenDim = 32;
inline constexpr int kGatLayers = 3;
inline constexpr double kLeakySlope = 0.2;

struct GatLayerParams {
  Mat weight;                // F_in x F_out
  std::vector<double> attn;  // 2*F_out: [source half | target half]
};

struct GatStack {
  std::array<GatLayerParams, kGatLayers> layers;
};

struct ModelFlags {
  // Off: the second stack reads the forward adjacency too, so node pairs
  // lose out-edge awareness while the parameter count stays fixed.
  bool use_feedback = true;
  // Off: uniform mean aggregation over the same neighborhoods (GCN-style).
  bool use_attention = true;
};

// Two 3-layer GAT stacks (forward and feedback direction) plus a two-layer
// MLP scoring the link (u, v) from the concatenated embeddings.
struct BiGatModel {
  GatStack forward_stack;
  GatStack feedback_stack;
  Mat mlp_hidden_w;                  // 2*kEmbedDim x kMlpHiddenDim
  std::vector<double> mlp_hidden_b;  // kMlpHiddenDim
  std::vector<double> mlp_out_w;     // kMlpHiddenDim
  double mlp_out_b = 0.0;
  ModelFlags flags;
};

// Zero-valued model with the canonical shapes (5 -> 16 -> 16 -> 16 per
// stack, 64 -> 32 -> 1 MLP). Also serves as the gradient / Adam-moment
// container, since those mirror the parameter shapes exactly.
BiGatModel make_model(ModelFlags flags = {});

void glorot_init(BiGatModel& model, Rng rng);

// Named view over every parameter tensor, in a fixed order shared by the
// optimizer, checkpoints, and gradient checking.
struct TensorRef {
  std::string name;
  double* data;
  int rows = 0;
  int cols = 0;
  size_t size() const { return static_cast<size_t>(rows) * cols; }
};
std::vector<TensorRef> tensor_refs(BiGatModel& model);

// Cached intermediates of one link-scoring forward pass; consumed by the
// reverse pass and by tests that inspect attention coefficients.
struct LayerTrace {
  Mat g;      // N x F_out, W-transformed inputs
  Mat s, t;   // N x 1, source/target halves of the raw attention scores
  Mat z;      // N x N, pre-LeakyReLU pair scores (neighborhood entries only)
  Mat alpha;  // N x N, attention coefficients (zero outside neighborhoods)
  Mat m;      // N x F_out, pre-ReLU aggregates
  Mat h;      // N x F_out, layer output
};

struct StackTrace {
  std::array<LayerTrace, kGatLayers> layers;
};

struct ForwardTrace {
  StackTrace fwd, bwd;
  Mat embed;  // N x kEmbedDim
  std::array<double, kMlpHiddenDim> mlp_hidden_pre{};
  std::array<double, kMlpHiddenDim> mlp_hidden_act{};
  double out_pre = 0.0;
  double y = 0.0;
  int u = 0, v = 0;
  // Smallest |preactivation| seen at any ReLU/LeakyReLU input.
  double min_abs_preact = 0.0;
};

// Single GAT layer: node i aggregates over {in-neighbors of i} + {i} with
// softmax attention (or a uniform mean when use_attention is off), then
// ReLU. reverse_dir selects the transposed adjacency's neighborhoods.
void gat_layer_forward(const GatLayerParams& params, const EncodedGraph& enc, bool reverse_dir,
                       bool use_attention, const Mat& h_in, LayerTrace& trace);

// Three chained GAT layers starting from the one-hot features.
Mat stack_forward(const GatStack& stack, const EncodedGraph& enc, bool reverse_dir,
                  bool use_attention);

// Per-node concatenation of the two stacks' outputs, width kEmbedDim.
Mat bi_embed(const BiGatModel& model, const EncodedGraph& enc);

// MLP link score in (0, 1) for the ordered pair (u, v).
double score_link(const BiGatModel& model, const Mat& embeddings, int u, int v);

// Fused scoring path: embeds, scores (u, v), and optionally captures the
// trace for the reverse pass. bi_embed + score_link compute the same values.
double forward_link(const BiGatModel& model, const EncodedGraph& enc, int u, int v,
                    ForwardTrace* trace = nullptr);

// Accumulates d(loss)/d(params) for one sample into grads (shapes must match
// the model). d_out_pre is the loss gradient at the MLP output preactivation.
void backward_link(const BiGatModel& model, const EncodedGraph& enc, const ForwardTrace& trace,
                   double d_out_pre, BiGatModel& grads);

// Smallest |preactivation| seen anywhere in the trace; gradient checks stay
// away from ReLU/LeakyReLU kinks by requiring a margin on this.
double kink_margin(const ForwardTrace& trace);

}  // namespace linknas
