#include "linknas/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace linknas {

using nlohmann::json;

namespace {

CellGraph cell_from_json(const json& j) {
  const auto& ops_json = j.at("ops");
  std::vector<Op> ops;
  ops.reserve(ops_json.size());
  for (const auto& name : ops_json) {
    auto op = op_from_name(name.get<std::string>());
    if (!op) throw std::runtime_error("unknown op \"" + name.get<std::string>() + "\"");
    ops.push_back(*op);
  }
  CellGraph cell(std::move(ops));
  const auto& adj = j.at("adj");
  if (adj.size() != static_cast<size_t>(cell.num_nodes))
    throw std::runtime_error("adj row count does not match ops length");
  for (int i = 0; i < cell.num_nodes; ++i) {
    const auto& row = adj.at(i);
    if (row.size() != static_cast<size_t>(cell.num_nodes))
      throw std::runtime_error("adj is not square");
    for (int j2 = 0; j2 < cell.num_nodes; ++j2) {
      const int v = row.at(j2).get<int>();
      if (v != 0 && v != 1) throw std::runtime_error("adj entries must be 0 or 1");
      cell.set(i, j2, static_cast<uint8_t>(v));
    }
  }
  return cell;
}

json cell_to_json(const CellGraph& cell) {
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

}  // namespace

std::vector<ArchRecord> load_benchmark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open benchmark file: " + path);
  std::vector<ArchRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ArchRecord rec;
    try {
      const json j = json::parse(line);
      rec.cell = cell_from_json(j);
      rec.test_accuracy = j.at("test_acc").get<double>();
    } catch (const std::exception& e) {
      throw std::runtime_error("benchmark line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.test_accuracy < 0.0 || rec.test_accuracy > 1.0)
      throw std::runtime_error("benchmark line " + std::to_string(line_no) +
                               ": test_acc outside [0,1]");
    const Verdict v = validate(rec.cell);
    if (!v.ok)
      throw std::runtime_error("benchmark line " + std::to_string(line_no) +
                               ": invalid cell: " + v.violations.front());
    records.push_back(std::move(rec));
  }
  return records;
}

void save_benchmark(const std::vector<ArchRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write benchmark file: " + path);
  for (const auto& rec : records) {
    json j = cell_to_json(rec.cell);
    j["test_acc"] = rec.test_accuracy;
    out << j.dump() << "\n";
  }
}

std::pair<std::vector<ArchRecord>, std::vector<ArchRecord>> rank_and_select(
    const std::vector<ArchRecord>& records, const SampleConfig& config) {
  if (records.empty()) throw std::runtime_error("rank_and_select: no records");
  if (config.k_high + config.k_low > static_cast<int>(records.size()))
    throw std::runtime_error("rank_and_select: need " +
                             std::to_string(config.k_high + config.k_low) + " records, have " +
                             std::to_string(records.size()));
  struct Keyed {
    const ArchRecord* rec;
    std::string canon;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(records.size());
  for (const auto& r : records) keyed.push_back({&r, canonical_form(r.cell)});
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.rec->test_accuracy != b.rec->test_accuracy)
      return a.rec->test_accuracy > b.rec->test_accuracy;
    return a.canon < b.canon;
  });
  std::vector<ArchRecord> top, bottom;
  for (int i = 0; i < config.k_high; ++i) top.push_back(*keyed[i].rec);
  for (int i = 0; i < config.k_low; ++i) bottom.push_back(*keyed[keyed.size() - 1 - i].rec);
  return {std::move(top), std::move(bottom)};
}

namespace {

CellGraph without_edge(const CellGraph& cell, int u, int v) {
  CellGraph g = cell;
  g.set(u, v, 0);
  return g;
}

// Emits the taken-out-link and disassembly samples of one cell. Disassembly
// is a single seeded removal walk; each step's sample survives with
// probability keep_p. The keep draw happens after the pick so the walk is
// the same trajectory for every keep_p.
void emit_link_samples(const CellGraph& cell, int label, double keep_p, bool with_disassembly,
                       Rng rng, std::vector<TrainingSample>& out) {
  for (auto [u, v] : cell.edges())
    out.push_back({without_edge(cell, u, v), u, v, label});
  if (!with_disassembly) return;
  CellGraph g = cell;
  auto remaining = g.edges();
  while (!remaining.empty()) {
    const size_t pick = static_cast<size_t>(rng.below(remaining.size()));
    const auto [u, v] = remaining[pick];
    g.set(u, v, 0);
    remaining.erase(remaining.begin() + static_cast<long>(pick));
    const bool keep = rng.uniform() < keep_p;
    if (keep) out.push_back({g, u, v, label});
  }
}

void dedup_samples(std::vector<TrainingSample>& samples) {
  std::unordered_set<std::string> seen;
  std::vector<TrainingSample> unique;
  unique.reserve(samples.size());
  for (auto& s : samples) {
    std::string key = canonical_form_marked(s.graph, s.src, s.dst);
    key.push_back(static_cast<char>(s.label));
    if (seen.insert(std::move(key)).second) unique.push_back(std::move(s));
  }
  samples = std::move(unique);
}

}  // namespace

std::vector<TrainingSample> build_positive_samples(const std::vector<ArchRecord>& top,
                                                   const SampleConfig& config) {
  std::vector<TrainingSample> out;
  const Rng root(config.seed);
  const Rng stream = root.derive(1);
  for (size_t c = 0; c < top.size(); ++c) {
    emit_link_samples(top[c].cell, 1, config.disassembly_fraction, !config.classic_mode,
                      stream.derive(c), out);
  }
  dedup_samples(out);
  return out;
}

std::vector<TrainingSample> build_negative_samples(const std::vector<ArchRecord>& top,
                                                   const std::vector<ArchRecord>& bottom,
                                                   const SampleConfig& config) {
  std::vector<TrainingSample> out;
  const Rng root(config.seed);
  const Rng stream = root.derive(2);
  if (!config.classic_mode) {
    for (size_t c = 0; c < bottom.size(); ++c) {
      emit_link_samples(bottom[c].cell, 0, config.disassembly_fraction, true, stream.derive(c),
                        out);
    }
  }
  for (const auto& rec : top) {
    for (auto [u, v] : legal_absent_links(rec.cell)) out.push_back({rec.cell, u, v, 0});
  }
  dedup_samples(out);
  return out;
}

std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> balance(
    std::vector<TrainingSample> pos, std::vector<TrainingSample> neg, uint64_t seed) {
  Rng rng = Rng(seed).derive(3);
  auto subsample = [&rng](std::vector<TrainingSample>& v, size_t target) {
    // Seeded partial Fisher-Yates, then restore input order.
    std::vector<size_t> idx(v.size());
    for (size_t i = 0; i < v.size(); ++i) idx[i] = i;
    for (size_t i = 0; i < target; ++i) {
      const size_t j = i + static_cast<size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(target);
    std::sort(idx.begin(), idx.end());
    std::vector<TrainingSample> kept;
    kept.reserve(target);
    for (size_t i : idx) kept.push_back(std::move(v[i]));
    v = std::move(kept);
  };
  if (neg.size() > pos.size())
    subsample(neg, pos.size());
  else if (pos.size() > neg.size())
    subsample(pos, neg.size());
  return {std::move(pos), std::move(neg)};
}

std::vector<std::pair<int, int>> legal_absent_links(const CellGraph& cell) {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < cell.num_nodes; ++u) {
    for (int v = 0; v < cell.num_nodes; ++v) {
      if (u == v || cell.at(u, v)) continue;
      if (cell.ops[u] == Op::kOutput) continue;
      if (cell.ops[v] == Op::kInput) continue;
      if (reachable(cell, v, u)) continue;  // adding u->v would close a cycle
      out.emplace_back(u, v);
    }
  }
  return out;
}

void save_samples(const std::vector<TrainingSample>& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sample file: " + path);
  for (const auto& s : samples) {
    json j = cell_to_json(s.graph);
    j["src"] = s.src;
    j["dst"] = s.dst;
    j["label"] = s.label;
    out << j.dump() << "\n";
  }
}

std::vector<TrainingSample> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample file: " + path);
  std::vector<TrainingSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TrainingSample s;
      s.graph = cell_from_json(j);
      s.src = j.at("src").get<int>();
      s.dst = j.at("dst").get<int>();
      s.label = j.at("label").get<int>();
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error("sample line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

std::string sample_digest(const std::vector<TrainingSample>& samples) {
  uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](uint8_t b) {
    h ^= b;
    h *= 0x100000001B3ULL;
  };
  for (const auto& s : samples) {
    mix(static_cast<uint8_t>(s.graph.num_nodes));
    for (Op op : s.graph.ops) mix(static_cast<uint8_t>(op));
    for (uint8_t b : s.graph.adj) mix(b);
    mix(static_cast<uint8_t>(s.src));
    mix(static_cast<uint8_t>(s.dst));
    mix(static_cast<uint8_t>(s.label));
  }
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace linknas
