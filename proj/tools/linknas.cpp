#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "linknas/darts.hpp"
#include "linknas/evaluate.hpp"
#include "linknas/generator.hpp"
#include "linknas/synth.hpp"
#include "linknas/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace linknas;

namespace {

int fail(const std::string& stage, const std::string& what) {
  std::cerr << "[" << stage << "] " << what << "\n";
  return 1;
}

json cell_json(const CellGraph& cell) {
  json j;
  j["ops"] = json::array();
  for (Op op : cell.ops) j["ops"].push_back(op_name(op));
  j["adj"] = json::array();
  for (int i = 0; i < cell.num_nodes; ++i) {
    json row = json::array();
    for (int k = 0; k < cell.num_nodes; ++k) row.push_back(static_cast<int>(cell.at(i, k)));
    j["adj"].push_back(std::move(row));
  }
  return j;
}

std::vector<TrainingSample> assemble_samples(const std::vector<ArchRecord>& benchmark,
                                             SampleConfig config) {
  const auto [top, bottom] = rank_and_select(benchmark, config);
  auto pos = build_positive_samples(top, config);
  auto neg = build_negative_samples(top, bottom, config);
  auto [bp, bn] = balance(std::move(pos), std::move(neg), config.seed);
  std::vector<TrainingSample> all = std::move(bp);
  all.insert(all.end(), bn.begin(), bn.end());
  return all;
}

void write_or_print(const std::string& out, const std::string& content) {
  if (out.empty()) {
    std::cout << content << "\n";
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << content << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell architecture design by graph-attention link prediction"};
  app.require_subcommand(1);

  std::string benchmark_path, out_path, config_path, checkpoint_path, samples_path, mapping_path;
  uint64_t seed = 0;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load and validate a benchmark file");
  ingest->add_option("--benchmark", benchmark_path, "Benchmark JSONL")->required();
  ingest->add_option("--out", out_path, "Optional normalized copy");

  // build-samples
  SampleConfig sample_cfg;
  auto* build = app.add_subcommand("build-samples", "Construct the balanced training sample set");
  build->add_option("--benchmark", benchmark_path)->required();
  build->add_option("--out", out_path, "Output samples JSONL")->required();
  build->add_option("--seed", seed);
  build->add_option("--k-high", sample_cfg.k_high);
  build->add_option("--k-low", sample_cfg.k_low);
  build->add_option("--disassembly-fraction", sample_cfg.disassembly_fraction);
  build->add_flag("--classic-mode", sample_cfg.classic_mode);

  // train
  TrainConfig train_cfg;
  ModelFlags flags;
  bool no_feedback = false, no_attention = false;
  auto* train_cmd = app.add_subcommand("train", "Train the link predictor on a sample file");
  train_cmd->add_option("--samples", samples_path)->required();
  train_cmd->add_option("--out", out_path, "Checkpoint path")->required();
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--epochs", train_cfg.epochs);
  train_cmd->add_option("--learning-rate", train_cfg.learning_rate);
  train_cmd->add_flag("--no-feedback", no_feedback, "Disable inverse aggregation");
  train_cmd->add_flag("--no-attention", no_attention, "Uniform mean aggregation");

  // generate
  int count = 10;
  SearchSpaceSpec space = nasbench101_space();
  auto* gen = app.add_subcommand("generate", "Sample cells from a trained checkpoint");
  gen->add_option("--checkpoint", checkpoint_path)->required();
  gen->add_option("--out", out_path, "Output cells JSONL (stdout if omitted)");
  gen->add_option("--seed", seed);
  gen->add_option("--count", count);
  gen->add_option("--max-edges", space.max_edges);
  gen->add_option("--max-vertices", space.max_vertices);
  gen->add_option("--samples", samples_path, "Optional sample file to check the digest against");

  // evaluate
  ExperimentProtocol protocol;
  bool uniform_baseline = false;
  std::vector<std::string> checkpoint_paths;
  std::string oracle_path;
  auto* eval = app.add_subcommand("evaluate", "Run the repeated design-and-query protocol");
  eval->add_option("--benchmark", benchmark_path)->required();
  eval->add_option("--out", out_path, "Report JSON (stdout if omitted)");
  eval->add_option("--seed", seed);
  eval->add_option("--models", protocol.n_models);
  eval->add_option("--cells", protocol.cells_per_model);
  eval->add_option("--repeats", protocol.n_repeats);
  eval->add_option("--k-high", sample_cfg.k_high);
  eval->add_option("--k-low", sample_cfg.k_low);
  eval->add_option("--epochs", train_cfg.epochs);
  eval->add_option("--checkpoint", checkpoint_paths, "Reuse checkpoints instead of retraining");
  eval->add_option("--oracle", oracle_path, "Planted-oracle JSON for unresolved cells");
  eval->add_flag("--uniform-baseline", uniform_baseline, "Random generation arm");
  eval->add_flag("--no-feedback", no_feedback);
  eval->add_flag("--no-attention", no_attention);

  // ablate
  auto* abl = app.add_subcommand("ablate", "Run the five-arm flag comparison");
  abl->add_option("--benchmark", benchmark_path)->required();
  abl->add_option("--out", out_path, "Report JSON (stdout if omitted)");
  abl->add_option("--seed", seed);
  abl->add_option("--models", protocol.n_models);
  abl->add_option("--cells", protocol.cells_per_model);
  abl->add_option("--repeats", protocol.n_repeats);
  abl->add_option("--k-high", sample_cfg.k_high);
  abl->add_option("--k-low", sample_cfg.k_low);
  abl->add_option("--epochs", train_cfg.epochs);
  abl->add_option("--oracle", oracle_path);

  // transfer-darts
  int genotype_count = 1;
  auto* darts_cmd = app.add_subcommand("transfer-darts",
                                       "Design DARTS genotypes with a cell-space checkpoint");
  darts_cmd->add_option("--checkpoint", checkpoint_path)->required();
  darts_cmd->add_option("--out", out_path, "Output directory")->required();
  darts_cmd->add_option("--seed", seed);
  darts_cmd->add_option("--count", genotype_count, "Number of genotype pairs");
  darts_cmd->add_option("--mapping", mapping_path, "Op mapping JSON (built-in if omitted)");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "One-shot run from a JSON config");
  pipe->add_option("--config", config_path)->required();

  CLI11_PARSE(app, argc, argv);
  flags.use_feedback = !no_feedback;
  flags.use_attention = !no_attention;

  try {
    if (*ingest) {
      const auto records = load_benchmark(benchmark_path);
      double lo = 1.0, hi = 0.0, sum = 0.0;
      for (const auto& r : records) {
        lo = std::min(lo, r.test_accuracy);
        hi = std::max(hi, r.test_accuracy);
        sum += r.test_accuracy;
      }
      json j;
      j["records"] = records.size();
      if (!records.empty())
        j["test_acc"] = {{"min", lo}, {"max", hi}, {"mean", sum / records.size()}};
      if (!out_path.empty()) save_benchmark(records, out_path);
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (*build) {
      sample_cfg.seed = seed;
      const auto records = load_benchmark(benchmark_path);
      const auto all = assemble_samples(records, sample_cfg);
      save_samples(all, out_path);
      std::cout << "wrote " << all.size() << " samples (digest " << sample_digest(all) << ")\n";
      return 0;
    }

    if (*train_cmd) {
      train_cfg.seed = seed;
      const auto samples = load_samples(samples_path);
      const TrainResult result = train(samples, train_cfg, flags);
      save_checkpoint(result.model, train_cfg, sample_digest(samples), out_path);
      std::cout << "epochs " << result.loss_history.size() << ", first loss "
                << result.loss_history.front() << ", final loss " << result.loss_history.back()
                << "\n";
      return 0;
    }

    if (*gen) {
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      if (!samples_path.empty()) {
        const auto samples = load_samples(samples_path);
        if (sample_digest(samples) != ckpt.sample_digest)
          std::cerr << "[generate] warning: sample digest " << sample_digest(samples)
                    << " does not match checkpoint digest " << ckpt.sample_digest << "\n";
      }
      std::ostringstream lines;
      const Rng root(seed);
      for (int c = 0; c < count; ++c) {
        const uint64_t cell_seed = root.derive(c).seed();
        const CellGraph cell = generate(ckpt.model, space, cell_seed);
        json j = cell_json(cell);
        j["seed"] = cell_seed;
        lines << j.dump() << "\n";
      }
      if (out_path.empty()) {
        std::cout << lines.str();
      } else {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot write " + out_path);
        f << lines.str();
      }
      return 0;
    }

    if (*eval || *abl) {
      EvaluateConfig config;
      config.samples = sample_cfg;
      config.train = train_cfg;
      config.flags = flags;
      config.protocol = protocol;
      config.protocol.seed = seed;
      config.uniform_baseline = uniform_baseline;
      if (!oracle_path.empty()) {
        std::ifstream f(oracle_path);
        if (!f) throw std::runtime_error("cannot open oracle file: " + oracle_path);
        json j;
        f >> j;
        PlantedOracle oracle = default_oracle();
        if (j.contains("seed")) oracle.seed = j.at("seed").get<uint64_t>();
        if (j.contains("noise_sd")) oracle.noise_sd = j.at("noise_sd").get<double>();
        config.oracle = oracle;
      }
      const auto records = load_benchmark(benchmark_path);
      if (*eval) {
        for (const std::string& path : checkpoint_paths) {
          const Checkpoint ckpt = load_checkpoint(path);
          config.checkpoints.push_back(ckpt.model);
        }
        const EvaluateReport report = evaluate(records, config);
        write_or_print(out_path, report.to_json());
        std::cerr << report.render_table();
      } else {
        const AblateReport report = ablate(records, config);
        write_or_print(out_path, report.to_json());
        std::cerr << report.render_table();
      }
      return 0;
    }

    if (*darts_cmd) {
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const OpMapping mapping =
          mapping_path.empty() ? default_mapping() : load_mapping(mapping_path);
      fs::create_directories(out_path);
      std::ofstream text(fs::path(out_path) / "genotypes.txt");
      std::ofstream nodeform(fs::path(out_path) / "nodeform.jsonl");
      if (!text || !nodeform) throw std::runtime_error("cannot write into " + out_path);
      const Rng root(seed);
      for (int g = 0; g < genotype_count; ++g) {
        const uint64_t pair_seed = root.derive(g).seed();
        const DartsGenotype genotype = generate_darts_genotype(ckpt.model, pair_seed, mapping);
        text << genotype_to_text(genotype) << "\n";
        for (const DartsCell* cell : {&genotype.normal, &genotype.reduce}) {
          json j = cell_json(darts_to_nodeform(*cell, mapping));
          j["seed"] = pair_seed;
          nodeform << j.dump() << "\n";
        }
      }
      std::cout << "wrote " << genotype_count << " genotype pair(s) to " << out_path << "\n";
      return 0;
    }

    if (*pipe) {
      const PipelineResult result = run_pipeline(config_path);
      std::cout << result.report.render_table();
      return 0;
    }
  } catch (const std::exception& e) {
    return fail(app.get_subcommands().front()->get_name(), e.what());
  }
  return 0;
}
