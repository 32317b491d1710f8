#include "linknas/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace linknas {

namespace {

constexpr uint64_t kParamInitStream = 4;

double clamped_ce(double y, int label) {
  const double yc = std::min(std::max(y, kLogClamp), 1.0 - kLogClamp);
  return label ? -std::log(yc) : -std::log(1.0 - yc);
}

// dL/d(out_pre) of the clamped cross-entropy through the sigmoid. Inside the
// clamp band this is exactly y - t; beyond it the loss is constant in y.
double ce_out_grad(double y, int label) {
  if (y <= kLogClamp || y >= 1.0 - kLogClamp) return 0.0;
  return y - static_cast<double>(label);
}

}  // namespace

double loss(const BiGatModel& model, const EncodedGraph& enc, int u, int v, int label) {
  const double y = forward_link(model, enc, u, v);
  return clamped_ce(y, label);
}

double loss(const BiGatModel& model, const TrainingSample& sample) {
  return loss(model, encode(sample.graph), sample.src, sample.dst, sample.label);
}

BiGatModel backward(const BiGatModel& model, const std::vector<TrainingSample>& batch) {
  if (batch.empty()) throw std::runtime_error("backward: empty batch");
  BiGatModel grads = make_model(model.flags);
  ForwardTrace trace;
  for (const TrainingSample& s : batch) {
    const EncodedGraph enc = encode(s.graph);
    const double y = forward_link(model, enc, s.src, s.dst, &trace);
    backward_link(model, enc, trace, ce_out_grad(y, s.label), grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (TensorRef& ref : tensor_refs(grads))
    for (size_t i = 0; i < ref.size(); ++i) ref.data[i] *= inv;
  return grads;
}

void adam_step(BiGatModel& model, const BiGatModel& grads, AdamState& state,
               const TrainConfig& config) {
  ++state.step;
  auto p = tensor_refs(model);
  auto g = tensor_refs(const_cast<BiGatModel&>(grads));
  auto m = tensor_refs(state.first_moment);
  auto v = tensor_refs(state.second_moment);
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t t = 0; t < p.size(); ++t) {
    for (size_t i = 0; i < p[t].size(); ++i) {
      const double gi = g[t].data[i];
      m[t].data[i] = b1 * m[t].data[i] + (1.0 - b1) * gi;
      v[t].data[i] = b2 * v[t].data[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[t].data[i] / bc1;
      const double vhat = v[t].data[i] / bc2;
      p[t].data[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
}

TrainResult train(const std::vector<TrainingSample>& samples, const TrainConfig& config,
                  ModelFlags flags) {
  if (samples.empty()) throw std::runtime_error("train: no samples");
  if (config.epochs < 1) throw std::runtime_error("train: epochs must be >= 1");

  std::vector<EncodedGraph> encoded;
  encoded.reserve(samples.size());
  for (const auto& s : samples) encoded.push_back(encode(s.graph));

  TrainResult result;
  result.model = make_model(flags);
  glorot_init(result.model, Rng(config.seed).derive(kParamInitStream));

  AdamState state;
  state.first_moment = make_model(flags);
  state.second_moment = make_model(flags);

  const double inv = 1.0 / static_cast<double>(samples.size());
  BiGatModel grads = make_model(flags);
  auto grad_refs = tensor_refs(grads);
  ForwardTrace trace;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (TensorRef& ref : grad_refs) std::memset(ref.data, 0, ref.size() * sizeof(double));
    double total = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
      const double y =
          forward_link(result.model, encoded[i], samples[i].src, samples[i].dst, &trace);
      total += clamped_ce(y, samples[i].label);
      backward_link(result.model, encoded[i], trace, ce_out_grad(y, samples[i].label) * inv,
                    grads);
    }
    const double mean_loss = total * inv;
    if (!std::isfinite(mean_loss))
      throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch));
    adam_step(result.model, grads, state, config);
    result.loss_history.push_back(mean_loss);
  }
  return result;
}

GradCheckReport grad_check(const BiGatModel& model, const TrainingSample& sample,
                           double tolerance, double step) {
  BiGatModel work = model;
  const EncodedGraph enc = encode(sample.graph);

  ForwardTrace trace;
  forward_link(work, enc, sample.src, sample.dst, &trace);
  GradCheckReport report;
  report.kink_margin = kink_margin(trace);

  const BiGatModel analytic = backward(work, {sample});
  auto a_refs = tensor_refs(const_cast<BiGatModel&>(analytic));
  auto w_refs = tensor_refs(work);
  for (size_t t = 0; t < w_refs.size(); ++t) {
    for (size_t i = 0; i < w_refs[t].size(); ++i) {
      const double saved = w_refs[t].data[i];
      w_refs[t].data[i] = saved + step;
      const double lp = loss(work, enc, sample.src, sample.dst, sample.label);
      w_refs[t].data[i] = saved - step;
      const double lm = loss(work, enc, sample.src, sample.dst, sample.label);
      w_refs[t].data[i] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      const double rel =
          std::fabs(a_refs[t].data[i] - numeric) / std::max(1.0, std::fabs(numeric));
      if (rel > report.worst_rel_error) {
        report.worst_rel_error = rel;
        report.worst_tensor = w_refs[t].name;
        report.worst_index = static_cast<int>(i);
      }
    }
  }
  report.pass = report.worst_rel_error <= tolerance;
  return report;
}

namespace {

void write_tensor(std::ostream& out, const TensorRef& ref) {
  out << "tensor " << ref.name << " " << ref.rows << " " << ref.cols << "\n";
  char buf[40];
  for (int r = 0; r < ref.rows; ++r) {
    for (int c = 0; c < ref.cols; ++c) {
      snprintf(buf, sizeof buf, "%.17g", ref.data[static_cast<size_t>(r) * ref.cols + c]);
      out << buf << (c + 1 == ref.cols ? "" : " ");
    }
    out << "\n";
  }
}

}  // namespace

void save_checkpoint(const BiGatModel& model, const TrainConfig& config,
                     const std::string& sample_digest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "LINKNAS-CHECKPOINT " << kCheckpointVersion << "\n";
  out << "meta use_feedback " << (model.flags.use_feedback ? 1 : 0) << "\n";
  out << "meta use_attention " << (model.flags.use_attention ? 1 : 0) << "\n";
  out << "meta sample_digest " << (sample_digest.empty() ? "-" : sample_digest) << "\n";
  char buf[40];
  snprintf(buf, sizeof buf, "%.17g", config.learning_rate);
  out << "meta learning_rate " << buf << "\n";
  out << "meta epochs " << config.epochs << "\n";
  out << "meta seed " << config.seed << "\n";
  for (const TensorRef& ref : tensor_refs(const_cast<BiGatModel&>(model)))
    write_tensor(out, ref);
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string word;
  int version = -1;
  if (!(in >> word >> version) || word != "LINKNAS-CHECKPOINT")
    throw std::runtime_error("malformed checkpoint: missing header");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version mismatch: file has " + std::to_string(version) +
                             ", expected " + std::to_string(kCheckpointVersion));

  Checkpoint ckpt;
  ckpt.version = version;
  ModelFlags flags;
  std::string key, value;
  while (in >> word && word == "meta") {
    if (!(in >> key >> value)) throw std::runtime_error("malformed checkpoint: truncated meta");
    if (key == "use_feedback") flags.use_feedback = value != "0";
    else if (key == "use_attention") flags.use_attention = value != "0";
    else if (key == "sample_digest") ckpt.sample_digest = value == "-" ? "" : value;
    else if (key == "learning_rate") ckpt.config.learning_rate = std::strtod(value.c_str(), nullptr);
    else if (key == "epochs") ckpt.config.epochs = std::stoi(value);
    else if (key == "seed") ckpt.config.seed = std::stoull(value);
  }
  ckpt.model = make_model(flags);
  auto refs = tensor_refs(ckpt.model);
  size_t next = 0;
  while (word == "tensor") {
    std::string name;
    int rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols))
      throw std::runtime_error("malformed checkpoint: bad tensor header");
    if (next >= refs.size() || name != refs[next].name || rows != refs[next].rows ||
        cols != refs[next].cols)
      throw std::runtime_error("malformed checkpoint: unexpected tensor \"" + name + "\"");
    for (size_t i = 0; i < refs[next].size(); ++i) {
      if (!(in >> value))
        throw std::runtime_error("malformed checkpoint: truncated tensor \"" + name + "\"");
      char* endp = nullptr;
      refs[next].data[i] = std::strtod(value.c_str(), &endp);
      if (endp == value.c_str())
        throw std::runtime_error("malformed checkpoint: bad value in \"" + name + "\"");
    }
    ++next;
    if (!(in >> word)) throw std::runtime_error("malformed checkpoint: missing end marker");
  }
  if (word != "end" || next != refs.size())
    throw std::runtime_error("malformed checkpoint: missing tensors or end marker");
  return ckpt;
}

}  // namespace linknas
