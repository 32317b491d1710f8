#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "linknas/dataset.hpp"
#include "linknas/generator.hpp"
#include "linknas/synth.hpp"
#include "linknas/training.hpp"

namespace linknas {

// The benchmark-space evaluation protocol: per repeat, n_models models each
// design cells_per_model cells; the best accuracy per repeat is reported
// with mean and std over repeats.
struct ExperimentProtocol {
  int n_models = 10;
  int cells_per_model = 10;
  int n_repeats = 30;
  uint64_t seed = 0;
};

struct EvaluateConfig {
  SampleConfig samples;
  TrainConfig train;
  ModelFlags flags;
  SearchSpaceSpec space = nasbench101_space();
  ExperimentProtocol protocol;
  // Budget of fresh seeds tried when a generated cell is missing from the
  // benchmark table (subsets and synthetic tables are not closed spaces).
  int lookup_retries = 10;
  bool uniform_baseline = false;
  // When set, cells still unresolved after the retry budget are scored with
  // the planted rule directly instead of being dropped.
  std::optional<PlantedOracle> oracle;
  // Pre-trained models reused across repeats; empty means retrain per repeat
  // from derived seeds.
  std::vector<BiGatModel> checkpoints;
};

struct EvaluateReport {
  int queries_training = 0;
  int queries_lookup = 0;
  int queries_total = 0;
  long retries_used = 0;
  int benchmark_hits = 0;
  int oracle_scored = 0;
  int unresolved = 0;
  std::string model_mode;  // "retrain_per_repeat" or "reuse_checkpoints"
  std::string strategy;    // "link-prediction" or "uniform-random"
  std::vector<double> best_per_repeat;
  std::vector<double> mean_per_repeat;
  double mean_best = 0.0;
  double std_best = 0.0;
  double mean_cell_accuracy = 0.0;
  double std_mean = 0.0;

  std::string to_json() const;
  std::string render_table() const;  // queries / top-1 accuracy / strategy
};

EvaluateReport evaluate(const std::vector<ArchRecord>& benchmark, const EvaluateConfig& config);

// The five flag rows of the ablation comparison: S (sample construction
// strategy), I (inverse information aggregation), G (attention vs uniform).
struct AblateArm {
  bool sample_strategy = true;
  bool inverse_aggregation = true;
  bool gat_attention = true;
};

std::array<AblateArm, 5> ablation_arms();

struct AblateRow {
  AblateArm arm;
  EvaluateReport report;
};

struct AblateReport {
  std::vector<AblateRow> rows;
  std::string to_json() const;
  std::string render_table() const;
};

AblateReport ablate(const std::vector<ArchRecord>& benchmark, const EvaluateConfig& base);

// Ranking quality of a trained model on planted link patterns: the
// probability that a legal absent link matching a beneficial pattern scores
// above one matching a detrimental pattern, pooled over the given cells.
double pattern_ranking_auc(const BiGatModel& model, const std::vector<ArchRecord>& cells,
                           const PlantedOracle& oracle);

// One-shot ingest -> samples -> train -> generate -> evaluate run driven by
// a JSON config; writes {config, samples, checkpoint, cells, report} under
// the run directory. Throws with the failing stage on any error.
struct PipelineResult {
  std::string run_dir;
  EvaluateReport report;
};
PipelineResult run_pipeline(const std::string& config_path);

}  // namespace linknas
