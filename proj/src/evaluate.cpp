#include "linknas/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace linknas {

using nlohmann::json;

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json report_to_json_obj(const EvaluateReport& r) {
  json j;
  j["queries"] = {{"training", r.queries_training},
                  {"lookups", r.queries_lookup},
                  {"total", r.queries_total},
                  {"retries", r.retries_used}};
  j["resolution"] = {{"benchmark_hits", r.benchmark_hits},
                     {"oracle_scored", r.oracle_scored},
                     {"unresolved", r.unresolved}};
  j["model_mode"] = r.model_mode;
  j["strategy"] = r.strategy;
  j["best_per_repeat"] = r.best_per_repeat;
  j["mean_per_repeat"] = r.mean_per_repeat;
  j["top1_accuracy"] = {{"mean", r.mean_best}, {"std", r.std_best}};
  j["mean_accuracy"] = {{"mean", r.mean_cell_accuracy}, {"std", r.std_mean}};
  return j;
}

}  // namespace

std::string EvaluateReport::to_json() const { return report_to_json_obj(*this).dump(2); }

std::string EvaluateReport::render_table() const {
  std::ostringstream os;
  os << "queries  top-1 accuracy     strategy\n";
  char buf[64];
  snprintf(buf, sizeof buf, "%-8d %.4f +/- %.4f  %s\n", queries_total, mean_best, std_best,
           strategy.c_str());
  os << buf;
  return os.str();
}

EvaluateReport evaluate(const std::vector<ArchRecord>& benchmark, const EvaluateConfig& config) {
  const ExperimentProtocol& proto = config.protocol;
  if (proto.n_models < 1 || proto.cells_per_model < 1 || proto.n_repeats < 1)
    throw std::runtime_error("evaluate: protocol counts must be >= 1");

  std::unordered_map<std::string, double> lookup;
  lookup.reserve(benchmark.size());
  for (const ArchRecord& rec : benchmark)
    lookup.emplace(canonical_form(rec.cell), rec.test_accuracy);

  const auto [top, bottom] = rank_and_select(benchmark, config.samples);

  EvaluateReport report;
  report.queries_training = config.samples.k_high + config.samples.k_low;
  report.queries_lookup = proto.n_models * proto.cells_per_model;
  report.queries_total = report.queries_training + report.queries_lookup;
  report.model_mode = config.checkpoints.empty() ? "retrain_per_repeat" : "reuse_checkpoints";
  report.strategy = config.uniform_baseline ? "uniform-random" : "link-prediction";

  const Rng root = Rng(proto.seed).derive(100);
  GenerateOptions gen_opts;
  gen_opts.uniform_baseline = config.uniform_baseline;

  for (int r = 0; r < proto.n_repeats; ++r) {
    const Rng repeat_rng = root.derive(r);
    std::vector<double> cell_accs;
    for (int m = 0; m < proto.n_models; ++m) {
      const Rng model_rng = repeat_rng.derive(m);
      BiGatModel model = make_model(config.flags);
      if (!config.checkpoints.empty()) {
        model = config.checkpoints[(static_cast<size_t>(r) * proto.n_models + m) %
                                   config.checkpoints.size()];
      } else if (!config.uniform_baseline) {
        SampleConfig sc = config.samples;
        sc.seed = model_rng.derive(0).seed();
        auto pos = build_positive_samples(top, sc);
        auto neg = build_negative_samples(top, bottom, sc);
        auto [bp, bn] = balance(std::move(pos), std::move(neg), sc.seed);
        std::vector<TrainingSample> all = std::move(bp);
        all.insert(all.end(), bn.begin(), bn.end());
        TrainConfig tc = config.train;
        tc.seed = model_rng.derive(1).seed();
        model = train(all, tc, config.flags).model;
      }
      const Rng gen_rng = model_rng.derive(2);
      for (int c = 0; c < proto.cells_per_model; ++c) {
        const Rng cell_rng = gen_rng.derive(c);
        bool resolved = false;
        CellGraph cell;
        for (int retry = 0; retry <= config.lookup_retries; ++retry) {
          cell = generate(model, config.space, cell_rng.derive(retry).seed(), gen_opts);
          auto it = lookup.find(canonical_form(cell));
          if (it != lookup.end()) {
            cell_accs.push_back(it->second);
            ++report.benchmark_hits;
            resolved = true;
            report.retries_used += retry;
            break;
          }
        }
        if (!resolved) {
          report.retries_used += config.lookup_retries;
          if (config.oracle) {
            cell_accs.push_back(oracle_true_accuracy(*config.oracle, cell));
            ++report.oracle_scored;
          } else {
            ++report.unresolved;
          }
        }
      }
    }
    if (!cell_accs.empty()) {
      report.best_per_repeat.push_back(*std::max_element(cell_accs.begin(), cell_accs.end()));
      report.mean_per_repeat.push_back(mean_of(cell_accs));
    }
  }
  report.mean_best = mean_of(report.best_per_repeat);
  report.std_best = sample_std(report.best_per_repeat);
  report.mean_cell_accuracy = mean_of(report.mean_per_repeat);
  report.std_mean = sample_std(report.mean_per_repeat);
  return report;
}

std::array<AblateArm, 5> ablation_arms() {
  return {{
      {false, false, true},
      {false, true, true},
      {true, false, true},
      {true, true, false},
      {true, true, true},
  }};
}

AblateReport ablate(const std::vector<ArchRecord>& benchmark, const EvaluateConfig& base) {
  AblateReport report;
  for (const AblateArm& arm : ablation_arms()) {
    EvaluateConfig config = base;
    config.samples.classic_mode = !arm.sample_strategy;
    config.flags.use_feedback = arm.inverse_aggregation;
    config.flags.use_attention = arm.gat_attention;
    report.rows.push_back({arm, evaluate(benchmark, config)});
  }
  return report;
}

std::string AblateReport::to_json() const {
  json j = json::array();
  for (const AblateRow& row : rows) {
    json r;
    r["sample_strategy"] = row.arm.sample_strategy;
    r["inverse_aggregation"] = row.arm.inverse_aggregation;
    r["gat_attention"] = row.arm.gat_attention;
    r["report"] = json::parse(row.report.to_json());
    j.push_back(std::move(r));
  }
  return j.dump(2);
}

std::string AblateReport::render_table() const {
  std::ostringstream os;
  os << "S I G  mean accuracy      top-1 accuracy\n";
  for (const AblateRow& row : rows) {
    char buf[96];
    snprintf(buf, sizeof buf, "%c %c %c  %.4f +/- %.4f  %.4f +/- %.4f\n",
             row.arm.sample_strategy ? 'x' : '.', row.arm.inverse_aggregation ? 'x' : '.',
             row.arm.gat_attention ? 'x' : '.', row.report.mean_cell_accuracy,
             row.report.std_mean, row.report.mean_best, row.report.std_best);
    os << buf;
  }
  return os.str();
}

double pattern_ranking_auc(const BiGatModel& model, const std::vector<ArchRecord>& cells,
                           const PlantedOracle& oracle) {
  auto matches = [](const std::vector<std::pair<Op, Op>>& patterns, Op a, Op b) {
    for (const auto& p : patterns)
      if (p.first == a && p.second == b) return true;
    return false;
  };
  std::vector<double> pos_scores, neg_scores;
  for (const ArchRecord& rec : cells) {
    const Mat embed = bi_embed(model, encode(rec.cell));
    for (auto [u, v] : legal_absent_links(rec.cell)) {
      const Op a = rec.cell.ops[u], b = rec.cell.ops[v];
      const bool beneficial = matches(oracle.beneficial_edges, a, b);
      const bool detrimental = matches(oracle.detrimental_edges, a, b);
      if (beneficial == detrimental) continue;
      const double score = score_link(model, embed, u, v);
      (beneficial ? pos_scores : neg_scores).push_back(score);
    }
  }
  if (pos_scores.empty() || neg_scores.empty())
    throw std::runtime_error("pattern_ranking_auc: no labeled candidate links");
  double wins = 0.0;
  for (double p : pos_scores) {
    for (double q : neg_scores) {
      if (p > q) wins += 1.0;
      else if (p == q) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos_scores.size()) * static_cast<double>(neg_scores.size()));
}

namespace {

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key))
    throw std::runtime_error("pipeline config: missing key \"" + where + key + "\"");
  return j.at(key);
}

PlantedOracle oracle_from_json(const json& j) {
  PlantedOracle o = default_oracle();
  if (j.contains("base_acc")) o.base_acc = j.at("base_acc").get<double>();
  if (j.contains("bonus")) o.bonus = j.at("bonus").get<double>();
  if (j.contains("penalty")) o.penalty = j.at("penalty").get<double>();
  if (j.contains("noise_sd")) o.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("seed")) o.seed = j.at("seed").get<uint64_t>();
  auto parse_patterns = [](const json& arr) {
    std::vector<std::pair<Op, Op>> out;
    for (const auto& pair : arr) {
      auto a = op_from_name(pair.at(0).get<std::string>());
      auto b = op_from_name(pair.at(1).get<std::string>());
      if (!a || !b) throw std::runtime_error("oracle pattern uses unknown op name");
      out.emplace_back(*a, *b);
    }
    return out;
  };
  if (j.contains("beneficial_edges")) o.beneficial_edges = parse_patterns(j.at("beneficial_edges"));
  if (j.contains("detrimental_edges"))
    o.detrimental_edges = parse_patterns(j.at("detrimental_edges"));
  return o;
}

}  // namespace

PipelineResult run_pipeline(const std::string& config_path) {
  namespace fs = std::filesystem;
  std::string stage = "config";
  try {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    json cfg;
    in >> cfg;

    const uint64_t seed = require(cfg, "seed", "").get<uint64_t>();
    const std::string out_dir = require(cfg, "out", "").get<std::string>();
    const json& bench_cfg = require(cfg, "benchmark", "");

    EvaluateConfig eval_cfg;
    eval_cfg.samples.seed = seed;
    if (cfg.contains("samples")) {
      const json& s = cfg.at("samples");
      if (s.contains("k_high")) eval_cfg.samples.k_high = s.at("k_high").get<int>();
      if (s.contains("k_low")) eval_cfg.samples.k_low = s.at("k_low").get<int>();
      if (s.contains("disassembly_fraction"))
        eval_cfg.samples.disassembly_fraction = s.at("disassembly_fraction").get<double>();
      if (s.contains("classic_mode"))
        eval_cfg.samples.classic_mode = s.at("classic_mode").get<bool>();
    }
    if (cfg.contains("train")) {
      const json& t = cfg.at("train");
      if (t.contains("learning_rate"))
        eval_cfg.train.learning_rate = t.at("learning_rate").get<double>();
      if (t.contains("epochs")) eval_cfg.train.epochs = t.at("epochs").get<int>();
    }
    if (cfg.contains("model")) {
      const json& m = cfg.at("model");
      if (m.contains("use_feedback")) eval_cfg.flags.use_feedback = m.at("use_feedback").get<bool>();
      if (m.contains("use_attention"))
        eval_cfg.flags.use_attention = m.at("use_attention").get<bool>();
    }
    if (cfg.contains("space")) {
      const json& s = cfg.at("space");
      if (s.contains("max_edges")) eval_cfg.space.max_edges = s.at("max_edges").get<int>();
      if (s.contains("max_vertices")) eval_cfg.space.max_vertices = s.at("max_vertices").get<int>();
    }
    if (cfg.contains("protocol")) {
      const json& p = cfg.at("protocol");
      if (p.contains("n_models")) eval_cfg.protocol.n_models = p.at("n_models").get<int>();
      if (p.contains("cells_per_model"))
        eval_cfg.protocol.cells_per_model = p.at("cells_per_model").get<int>();
      if (p.contains("n_repeats")) eval_cfg.protocol.n_repeats = p.at("n_repeats").get<int>();
    }
    eval_cfg.protocol.seed = seed;
    if (cfg.contains("lookup_retries")) eval_cfg.lookup_retries = cfg.at("lookup_retries").get<int>();

    stage = "ingest";
    std::vector<ArchRecord> benchmark;
    if (bench_cfg.contains("path")) {
      benchmark = load_benchmark(bench_cfg.at("path").get<std::string>());
    } else if (bench_cfg.contains("synth")) {
      const json& s = bench_cfg.at("synth");
      PlantedOracle oracle = oracle_from_json(s);
      eval_cfg.oracle = oracle;
      benchmark = synth_records(oracle, require(s, "records", "benchmark.synth.").get<int>());
    } else {
      throw std::runtime_error("pipeline config: benchmark needs \"path\" or \"synth\"");
    }
    if (cfg.contains("oracle")) eval_cfg.oracle = oracle_from_json(cfg.at("oracle"));

    fs::create_directories(out_dir);
    {
      std::ofstream out(fs::path(out_dir) / "config.json");
      out << cfg.dump(2) << "\n";
    }

    stage = "samples";
    const auto [top, bottom] = rank_and_select(benchmark, eval_cfg.samples);
    auto pos = build_positive_samples(top, eval_cfg.samples);
    auto neg = build_negative_samples(top, bottom, eval_cfg.samples);
    auto [bp, bn] = balance(std::move(pos), std::move(neg), eval_cfg.samples.seed);
    std::vector<TrainingSample> all = std::move(bp);
    all.insert(all.end(), bn.begin(), bn.end());
    save_samples(all, (fs::path(out_dir) / "samples.jsonl").string());

    stage = "train";
    TrainConfig tc = eval_cfg.train;
    tc.seed = Rng(seed).derive(200).seed();
    const TrainResult trained = train(all, tc, eval_cfg.flags);
    save_checkpoint(trained.model, tc, sample_digest(all),
                    (fs::path(out_dir) / "checkpoint.txt").string());

    stage = "generate";
    {
      std::ofstream out(fs::path(out_dir) / "cells.jsonl");
      const Rng gen_rng = Rng(seed).derive(201);
      for (int c = 0; c < eval_cfg.protocol.cells_per_model; ++c) {
        const uint64_t cell_seed = gen_rng.derive(c).seed();
        const CellGraph cell = generate(trained.model, eval_cfg.space, cell_seed);
        json j;
        j["ops"] = json::array();
        for (Op op : cell.ops) j["ops"].push_back(op_name(op));
        j["adj"] = json::array();
        for (int i = 0; i < cell.num_nodes; ++i) {
          json row = json::array();
          for (int k = 0; k < cell.num_nodes; ++k) row.push_back(static_cast<int>(cell.at(i, k)));
          j["adj"].push_back(std::move(row));
        }
        j["seed"] = cell_seed;
        out << j.dump() << "\n";
      }
    }

    stage = "evaluate";
    PipelineResult result;
    result.run_dir = out_dir;
    result.report = evaluate(benchmark, eval_cfg);
    {
      std::ofstream out(fs::path(out_dir) / "report.json");
      out << result.report.to_json() << "\n";
    }
    return result;
  } catch (const std::exception& e) {
    throw std::runtime_error("pipeline stage \"" + stage + "\": " + e.what());
  }
}

}  // namespace linknas
