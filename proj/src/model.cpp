#include "linknas/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace linknas {

namespace {

GatLayerParams make_layer(int fin, int fout) {
  GatLayerParams p;
  p.weight = Mat(fin, fout);
  p.attn.assign(static_cast<size_t>(2) * fout, 0.0);
  return p;
}

}  // namespace

BiGatModel make_model(ModelFlags flags) {
  BiGatModel m;
  for (GatStack* stack : {&m.forward_stack, &m.feedback_stack}) {
    stack->layers[0] = make_layer(kFeatureDim, kHiddenDim);
    stack->layers[1] = make_layer(kHiddenDim, kHiddenDim);
    stack->layers[2] = make_layer(kHiddenDim, kHiddenDim);
  }
  m.mlp_hidden_w = Mat(2 * kEmbedDim, kMlpHiddenDim);
  m.mlp_hidden_b.assign(kMlpHiddenDim, 0.0);
  m.mlp_out_w.assign(kMlpHiddenDim, 0.0);
  m.mlp_out_b = 0.0;
  m.flags = flags;
  return m;
}

void glorot_init(BiGatModel& model, Rng rng) {
  auto fill = [&rng](double* data, size_t len, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (size_t i = 0; i < len; ++i) data[i] = rng.uniform(-limit, limit);
  };
  for (GatStack* stack : {&model.forward_stack, &model.feedback_stack}) {
    for (auto& layer : stack->layers) {
      fill(layer.weight.data(), layer.weight.size(), layer.weight.rows(), layer.weight.cols());
      fill(layer.attn.data(), layer.attn.size(), static_cast<int>(layer.attn.size()), 1);
    }
  }
  fill(model.mlp_hidden_w.data(), model.mlp_hidden_w.size(), 2 * kEmbedDim, kMlpHiddenDim);
  fill(model.mlp_out_w.data(), model.mlp_out_w.size(), kMlpHiddenDim, 1);
}

std::vector<TensorRef> tensor_refs(BiGatModel& model) {
  std::vector<TensorRef> refs;
  const char* stack_names[2] = {"forward", "feedback"};
  GatStack* stacks[2] = {&model.forward_stack, &model.feedback_stack};
  for (int s = 0; s < 2; ++s) {
    for (int l = 0; l < kGatLayers; ++l) {
      GatLayerParams& p = stacks[s]->layers[l];
      const std::string base = std::string(stack_names[s]) + ".layer" + std::to_string(l);
      refs.push_back({base + ".weight", p.weight.data(), p.weight.rows(), p.weight.cols()});
      refs.push_back({base + ".attn", p.attn.data(), 1, static_cast<int>(p.attn.size())});
    }
  }
  refs.push_back({"mlp.hidden.weight", model.mlp_hidden_w.data(), model.mlp_hidden_w.rows(),
                  model.mlp_hidden_w.cols()});
  refs.push_back({"mlp.hidden.bias", model.mlp_hidden_b.data(), 1,
                  static_cast<int>(model.mlp_hidden_b.size())});
  refs.push_back({"mlp.out.weight", model.mlp_out_w.data(), 1,
                  static_cast<int>(model.mlp_out_w.size())});
  refs.push_back({"mlp.out.bias", &model.mlp_out_b, 1, 1});
  return refs;
}

void gat_layer_forward(const GatLayerParams& params, const EncodedGraph& enc, bool reverse_dir,
                       bool use_attention, const Mat& h_in, LayerTrace& trace) {
  const int n = enc.n;
  const int fout = params.weight.cols();
  if (h_in.cols() != params.weight.rows())
    throw std::runtime_error("gat_layer_forward: input width " + std::to_string(h_in.cols()) +
                             " does not match weight rows " +
                             std::to_string(params.weight.rows()));
  const std::vector<int>& off = reverse_dir ? enc.out_off : enc.in_off;
  const std::vector<int>& nbr = reverse_dir ? enc.out_nbr : enc.in_nbr;

  matmul(h_in, params.weight, trace.g);
  trace.z.resize(n, n);
  trace.alpha.resize(n, n);
  trace.m.resize(n, fout);
  trace.h.resize(n, fout);

  if (use_attention) {
    trace.s.resize(n, 1);
    trace.t.resize(n, 1);
    const double* a_src = params.attn.data();
    const double* a_dst = params.attn.data() + fout;
    for (int i = 0; i < n; ++i) {
      const double* gi = trace.g.row(i);
      double s = 0.0, t = 0.0;
      for (int f = 0; f < fout; ++f) {
        s += a_src[f] * gi[f];
        t += a_dst[f] * gi[f];
      }
      trace.s(i, 0) = s;
      trace.t(i, 0) = t;
    }
  }

  for (int i = 0; i < n; ++i) {
    const int begin = off[i], end = off[i + 1];
    if (use_attention) {
      double emax = -std::numeric_limits<double>::infinity();
      for (int k = begin; k < end; ++k) {
        const int j = nbr[k];
        const double z = trace.s(i, 0) + trace.t(j, 0);
        trace.z(i, j) = z;
        const double e = z > 0.0 ? z : kLeakySlope * z;
        if (e > emax) emax = e;
      }
      double denom = 0.0;
      for (int k = begin; k < end; ++k) {
        const int j = nbr[k];
        const double z = trace.z(i, j);
        const double e = z > 0.0 ? z : kLeakySlope * z;
        const double w = std::exp(e - emax);
        trace.alpha(i, j) = w;
        denom += w;
      }
      for (int k = begin; k < end; ++k) trace.alpha(i, nbr[k]) /= denom;
    } else {
      const double w = 1.0 / (end - begin);
      for (int k = begin; k < end; ++k) trace.alpha(i, nbr[k]) = w;
    }
    double* mi = trace.m.row(i);
    for (int k = begin; k < end; ++k) {
      const int j = nbr[k];
      const double a = trace.alpha(i, j);
      const double* gj = trace.g.row(j);
      for (int f = 0; f < fout; ++f) mi[f] += a * gj[f];
    }
    double* hi = trace.h.row(i);
    for (int f = 0; f < fout; ++f) hi[f] = mi[f] > 0.0 ? mi[f] : 0.0;
  }
}

namespace {

void stack_forward_traced(const GatStack& stack, const EncodedGraph& enc, bool reverse_dir,
                          bool use_attention, StackTrace& trace) {
  const Mat* h = &enc.features;
  for (int l = 0; l < kGatLayers; ++l) {
    gat_layer_forward(stack.layers[l], enc, reverse_dir, use_attention, *h, trace.layers[l]);
    h = &trace.layers[l].h;
  }
}

void update_kink_margin(const EncodedGraph& enc, bool reverse_dir, bool use_attention,
                        const StackTrace& st, double& margin) {
  const std::vector<int>& off = reverse_dir ? enc.out_off : enc.in_off;
  const std::vector<int>& nbr = reverse_dir ? enc.out_nbr : enc.in_nbr;
  for (const LayerTrace& t : st.layers) {
    for (size_t i = 0; i < t.m.size(); ++i)
      margin = std::min(margin, std::fabs(t.m.data()[i]));
    if (use_attention) {
      for (int i = 0; i < enc.n; ++i)
        for (int k = off[i]; k < off[i + 1]; ++k)
          margin = std::min(margin, std::fabs(t.z(i, nbr[k])));
    }
  }
}

// Reused scratch for the fused forward/backward path.
struct Scratch {
  ForwardTrace trace;
  Mat demb, dh, dh_next, dm, dg, ds, dt;
  std::vector<double> dalpha;
};

thread_local Scratch g_scratch;

}  // namespace

Mat stack_forward(const GatStack& stack, const EncodedGraph& enc, bool reverse_dir,
                  bool use_attention) {
  StackTrace trace;
  stack_forward_traced(stack, enc, reverse_dir, use_attention, trace);
  return trace.layers[kGatLayers - 1].h;
}

Mat bi_embed(const BiGatModel& model, const EncodedGraph& enc) {
  const Mat fwd = stack_forward(model.forward_stack, enc, false, model.flags.use_attention);
  const Mat bwd = stack_forward(model.feedback_stack, enc, model.flags.use_feedback,
                                model.flags.use_attention);
  Mat embed(enc.n, kEmbedDim);
  for (int i = 0; i < enc.n; ++i) {
    for (int f = 0; f < kHiddenDim; ++f) {
      embed(i, f) = fwd(i, f);
      embed(i, kHiddenDim + f) = bwd(i, f);
    }
  }
  return embed;
}

double score_link(const BiGatModel& model, const Mat& embeddings, int u, int v) {
  if (u < 0 || v < 0 || u >= embeddings.rows() || v >= embeddings.rows())
    throw std::out_of_range("score_link: node index out of range");
  const double* hu = embeddings.row(u);
  const double* hv = embeddings.row(v);
  double hidden[kMlpHiddenDim];
  for (int k = 0; k < kMlpHiddenDim; ++k) {
    double acc = model.mlp_hidden_b[k];
    for (int d = 0; d < kEmbedDim; ++d) {
      acc += hu[d] * model.mlp_hidden_w(d, k);
      acc += hv[d] * model.mlp_hidden_w(kEmbedDim + d, k);
    }
    hidden[k] = acc > 0.0 ? acc : 0.0;
  }
  double out = model.mlp_out_b;
  for (int k = 0; k < kMlpHiddenDim; ++k) out += hidden[k] * model.mlp_out_w[k];
  return 1.0 / (1.0 + std::exp(-out));
}

double forward_link(const BiGatModel& model, const EncodedGraph& enc, int u, int v,
                    ForwardTrace* trace) {
  if (u < 0 || v < 0 || u >= enc.n || v >= enc.n)
    throw std::out_of_range("forward_link: node index out of range");
  ForwardTrace& t = trace ? *trace : g_scratch.trace;
  t.u = u;
  t.v = v;
  stack_forward_traced(model.forward_stack, enc, false, model.flags.use_attention, t.fwd);
  stack_forward_traced(model.feedback_stack, enc, model.flags.use_feedback,
                       model.flags.use_attention, t.bwd);
  const Mat& hf = t.fwd.layers[kGatLayers - 1].h;
  const Mat& hb = t.bwd.layers[kGatLayers - 1].h;
  t.embed.resize(enc.n, kEmbedDim);
  for (int i = 0; i < enc.n; ++i) {
    double* row = t.embed.row(i);
    const double* f = hf.row(i);
    const double* b = hb.row(i);
    for (int k = 0; k < kHiddenDim; ++k) {
      row[k] = f[k];
      row[kHiddenDim + k] = b[k];
    }
  }
  const double* hu = t.embed.row(u);
  const double* hv = t.embed.row(v);
  for (int k = 0; k < kMlpHiddenDim; ++k) {
    double acc = model.mlp_hidden_b[k];
    for (int d = 0; d < kEmbedDim; ++d) {
      acc += hu[d] * model.mlp_hidden_w(d, k);
      acc += hv[d] * model.mlp_hidden_w(kEmbedDim + d, k);
    }
    t.mlp_hidden_pre[k] = acc;
    t.mlp_hidden_act[k] = acc > 0.0 ? acc : 0.0;
  }
  double out = model.mlp_out_b;
  for (int k = 0; k < kMlpHiddenDim; ++k) out += t.mlp_hidden_act[k] * model.mlp_out_w[k];
  t.out_pre = out;
  t.y = 1.0 / (1.0 + std::exp(-out));

  double margin = std::numeric_limits<double>::infinity();
  update_kink_margin(enc, false, model.flags.use_attention, t.fwd, margin);
  update_kink_margin(enc, model.flags.use_feedback, model.flags.use_attention, t.bwd, margin);
  for (int k = 0; k < kMlpHiddenDim; ++k)
    margin = std::min(margin, std::fabs(t.mlp_hidden_pre[k]));
  t.min_abs_preact = margin;
  return t.y;
}

double kink_margin(const ForwardTrace& trace) { return trace.min_abs_preact; }

namespace {

// Reverse pass through one stack. d_h holds dL/d(final layer output) on
// entry and is consumed. h_in of layer 0 is the one-hot feature matrix.
void stack_backward(const GatStack& stack, const StackTrace& st, const EncodedGraph& enc,
                    bool reverse_dir, bool use_attention, Mat& d_h, GatStack& grads,
                    Scratch& ws) {
  const int n = enc.n;
  const std::vector<int>& off = reverse_dir ? enc.out_off : enc.in_off;
  const std::vector<int>& nbr = reverse_dir ? enc.out_nbr : enc.in_nbr;
  for (int l = kGatLayers - 1; l >= 0; --l) {
    const GatLayerParams& p = stack.layers[l];
    const LayerTrace& t = st.layers[l];
    const Mat& h_in = (l == 0) ? enc.features : st.layers[l - 1].h;
    const int fin = p.weight.rows();
    const int fout = p.weight.cols();

    ws.dm.resize(n, fout);
    for (int i = 0; i < n; ++i) {
      const double* mi = t.m.row(i);
      const double* dhi = d_h.row(i);
      double* dmi = ws.dm.row(i);
      for (int f = 0; f < fout; ++f) dmi[f] = mi[f] > 0.0 ? dhi[f] : 0.0;
    }

    ws.dg.resize(n, fout);
    if (use_attention) {
      ws.ds.resize(n, 1);
      ws.dt.resize(n, 1);
      if (ws.dalpha.size() < static_cast<size_t>(n)) ws.dalpha.resize(n);
      for (int i = 0; i < n; ++i) {
        const int begin = off[i], end = off[i + 1];
        const double* dmi = ws.dm.row(i);
        double weighted_sum = 0.0;
        for (int k = begin; k < end; ++k) {
          const int j = nbr[k];
          const double* gj = t.g.row(j);
          double da = 0.0;
          for (int f = 0; f < fout; ++f) da += dmi[f] * gj[f];
          ws.dalpha[k - begin] = da;
          weighted_sum += t.alpha(i, j) * da;
          // aggregation contribution to dg_j
          double* dgj = ws.dg.row(j);
          const double a = t.alpha(i, j);
          for (int f = 0; f < fout; ++f) dgj[f] += a * dmi[f];
        }
        for (int k = begin; k < end; ++k) {
          const int j = nbr[k];
          const double de = t.alpha(i, j) * (ws.dalpha[k - begin] - weighted_sum);
          const double dz = t.z(i, j) > 0.0 ? de : kLeakySlope * de;
          ws.ds(i, 0) += dz;
          ws.dt(j, 0) += dz;
        }
      }
      const double* a_src = p.attn.data();
      const double* a_dst = p.attn.data() + fout;
      double* ga_src = grads.layers[l].attn.data();
      double* ga_dst = grads.layers[l].attn.data() + fout;
      for (int i = 0; i < n; ++i) {
        const double dsi = ws.ds(i, 0);
        const double dti = ws.dt(i, 0);
        const double* gi = t.g.row(i);
        double* dgi = ws.dg.row(i);
        for (int f = 0; f < fout; ++f) {
          ga_src[f] += dsi * gi[f];
          ga_dst[f] += dti * gi[f];
          dgi[f] += dsi * a_src[f] + dti * a_dst[f];
        }
      }
    } else {
      for (int i = 0; i < n; ++i) {
        const int begin = off[i], end = off[i + 1];
        const double w = 1.0 / (end - begin);
        const double* dmi = ws.dm.row(i);
        for (int k = begin; k < end; ++k) {
          double* dgj = ws.dg.row(nbr[k]);
          for (int f = 0; f < fout; ++f) dgj[f] += w * dmi[f];
        }
      }
    }

    Mat& gw = grads.layers[l].weight;
    for (int i = 0; i < n; ++i) {
      const double* hi = h_in.row(i);
      const double* dgi = ws.dg.row(i);
      for (int fi = 0; fi < fin; ++fi) {
        const double hv = hi[fi];
        if (hv == 0.0) continue;
        double* gwrow = gw.row(fi);
        for (int fo = 0; fo < fout; ++fo) gwrow[fo] += hv * dgi[fo];
      }
    }

    if (l > 0) {
      ws.dh_next.resize(n, fin);
      for (int i = 0; i < n; ++i) {
        const double* dgi = ws.dg.row(i);
        double* dhi = ws.dh_next.row(i);
        for (int fi = 0; fi < fin; ++fi) {
          const double* wrow = p.weight.row(fi);
          double acc = 0.0;
          for (int fo = 0; fo < fout; ++fo) acc += dgi[fo] * wrow[fo];
          dhi[fi] = acc;
        }
      }
      std::swap(d_h, ws.dh_next);
    }
  }
}

}  // namespace

void backward_link(const BiGatModel& model, const EncodedGraph& enc, const ForwardTrace& trace,
                   double d_out_pre, BiGatModel& grads) {
  const int n = enc.n;
  Scratch& ws = g_scratch;
  const double* hu = trace.embed.row(trace.u);
  const double* hv = trace.embed.row(trace.v);

  grads.mlp_out_b += d_out_pre;
  double dhid[kMlpHiddenDim];
  for (int k = 0; k < kMlpHiddenDim; ++k) {
    grads.mlp_out_w[k] += d_out_pre * trace.mlp_hidden_act[k];
    const double da = d_out_pre * model.mlp_out_w[k];
    dhid[k] = trace.mlp_hidden_pre[k] > 0.0 ? da : 0.0;
    grads.mlp_hidden_b[k] += dhid[k];
  }
  ws.demb.resize(n, kEmbedDim);
  double* demb_u = ws.demb.row(trace.u);
  double* demb_v = ws.demb.row(trace.v);
  for (int d = 0; d < kEmbedDim; ++d) {
    const double zu = hu[d];
    const double zv = hv[d];
    double acc_u = 0.0, acc_v = 0.0;
    double* wrow_u = grads.mlp_hidden_w.row(d);
    double* wrow_v = grads.mlp_hidden_w.row(kEmbedDim + d);
    const double* mrow_u = model.mlp_hidden_w.row(d);
    const double* mrow_v = model.mlp_hidden_w.row(kEmbedDim + d);
    for (int k = 0; k < kMlpHiddenDim; ++k) {
      wrow_u[k] += zu * dhid[k];
      wrow_v[k] += zv * dhid[k];
      acc_u += mrow_u[k] * dhid[k];
      acc_v += mrow_v[k] * dhid[k];
    }
    demb_u[d] += acc_u;
    demb_v[d] += acc_v;
  }

  // Split the embedding gradient into the two stacks' halves.
  ws.dh.resize(n, kHiddenDim);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < kHiddenDim; ++f) ws.dh(i, f) = ws.demb(i, f);
  stack_backward(model.forward_stack, trace.fwd, enc, false, model.flags.use_attention, ws.dh,
                 grads.forward_stack, ws);

  ws.dh.resize(n, kHiddenDim);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < kHiddenDim; ++f) ws.dh(i, f) = ws.demb(i, kHiddenDim + f);
  stack_backward(model.feedback_stack, trace.bwd, enc, model.flags.use_feedback,
                 model.flags.use_attention, ws.dh, grads.feedback_stack, ws);
}

}  // namespace linknas
