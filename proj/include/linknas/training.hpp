#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linknas/dataset.hpp"
#include "linknas/model.hpp"

namespace linknas {

struct TrainConfig {
  double learning_rate = 0.0005;
  int epochs = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
};

// First/second moment accumulators mirroring the parameter shapes.
struct AdamState {
  BiGatModel first_moment;
  BiGatModel second_moment;
  long step = 0;
};

inline constexpr double kLogClamp = 1e-12;

// Cross-entropy of the link score against the binary label, with the score
// clamped to [kLogClamp, 1 - kLogClamp] so the loss stays finite.
double loss(const BiGatModel& model, const TrainingSample& sample);
double loss(const BiGatModel& model, const EncodedGraph& enc, int u, int v, int label);

// Mean-over-batch gradients of the loss w.r.t. every parameter.
BiGatModel backward(const BiGatModel& model, const std::vector<TrainingSample>& batch);

// One Adam update of model in place from the given gradients.
void adam_step(BiGatModel& model, const BiGatModel& grads, AdamState& state,
               const TrainConfig& config);

struct TrainResult {
  BiGatModel model;
  std::vector<double> loss_history;  // per-epoch mean loss, pre-update
};

// Glorot-uniform init from the seed's parameter stream, then full-batch Adam
// for config.epochs steps. Fully deterministic given the seed. Throws if the
// loss stops being finite, reporting the epoch.
TrainResult train(const std::vector<TrainingSample>& samples, const TrainConfig& config,
                  ModelFlags flags = {});

struct GradCheckReport {
  bool pass = false;
  double worst_rel_error = 0.0;
  std::string worst_tensor;
  int worst_index = -1;
  double kink_margin = 0.0;
};

// Central finite differences per coordinate against backward() on a single
// sample. rel error = |analytic - numeric| / max(1, |numeric|).
GradCheckReport grad_check(const BiGatModel& model, const TrainingSample& sample,
                           double tolerance, double step = 1e-5);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  BiGatModel model;
  TrainConfig config;
  std::string sample_digest;
  int version = kCheckpointVersion;
};

// Versioned text format; parameters print with 17 significant digits so
// save/load round-trips bit-exactly. Throws on version or format errors.
void save_checkpoint(const BiGatModel& model, const TrainConfig& config,
                     const std::string& sample_digest, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace linknas
