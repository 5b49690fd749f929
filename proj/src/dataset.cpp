#include "more/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "more/errors.hpp"

namespace more {

namespace {

using nlohmann::json;

json stats_to_json(const NormalizationStats& stats) {
  return json{{"state_mean", stats.state_mean},   {"state_std", stats.state_std},
              {"action_mean", stats.action_mean}, {"action_std", stats.action_std},
              {"reward_mean", stats.reward_mean}, {"reward_std", stats.reward_std}};
}

NormalizationStats stats_from_json(const json& j) {
  NormalizationStats stats;
  stats.state_mean = j.at("state_mean").get<std::vector<double>>();
  stats.state_std = j.at("state_std").get<std::vector<double>>();
  stats.action_mean = j.at("action_mean").get<std::vector<double>>();
  stats.action_std = j.at("action_std").get<std::vector<double>>();
  stats.reward_mean = j.at("reward_mean").get<double>();
  stats.reward_std = j.at("reward_std").get<double>();
  return stats;
}

}  // namespace

void save_dataset(const OfflineDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataFormatError("save_dataset: cannot open '" + path + "' for writing");

  json header{{"magic", "MOREDS1"},
              {"state_dim", dataset.state_dim},
              {"action_dim", dataset.action_dim},
              {"m", dataset.num_costs},
              {"count", dataset.transitions.size()},
              {"metadata", dataset.metadata},
              {"normalization", stats_to_json(dataset.normalization)}};
  out << header.dump() << "\n";

  for (const Transition& t : dataset.transitions) {
    json rec{{"s", t.s},          {"a", t.a},     {"r", t.r},
             {"c", t.cost_vector}, {"c_comb", t.combined_cost},
             {"s2", t.s_next},    {"done", t.done}};
    out << rec.dump() << "\n";
  }
  if (!out) throw DataFormatError("save_dataset: write to '" + path + "' failed");
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("load_dataset: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw DataFormatError("load_dataset: '" + path + "' is empty");
  }

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataFormatError("load_dataset: malformed header line 1: " +
                          std::string(e.what()));
  }
  if (!header.contains("magic") || header["magic"] != "MOREDS1") {
    throw DataFormatError("load_dataset: magic mismatch (expected MOREDS1)");
  }

  OfflineDataset dataset;
  std::size_t count = 0;
  try {
    dataset.state_dim = header.at("state_dim").get<int>();
    dataset.action_dim = header.at("action_dim").get<int>();
    dataset.num_costs = header.at("m").get<int>();
    count = header.at("count").get<std::size_t>();
    dataset.metadata =
        header.at("metadata").get<std::map<std::string, std::string>>();
    dataset.normalization = stats_from_json(header.at("normalization"));
  } catch (const json::exception& e) {
    throw DataFormatError("load_dataset: bad header fields: " +
                          std::string(e.what()));
  }

  dataset.transitions.reserve(count);
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataFormatError("load_dataset: malformed record at line " +
                            std::to_string(line_number) + ": " + e.what());
    }
    Transition t;
    try {
      t.s = rec.at("s").get<std::vector<double>>();
      t.a = rec.at("a").get<std::vector<double>>();
      t.r = rec.at("r").get<double>();
      t.cost_vector = rec.at("c").get<std::vector<double>>();
      t.combined_cost = rec.at("c_comb").get<double>();
      t.s_next = rec.at("s2").get<std::vector<double>>();
      t.done = rec.at("done").get<bool>();
    } catch (const json::exception& e) {
      throw DataFormatError("load_dataset: bad record fields at line " +
                            std::to_string(line_number) + ": " + e.what());
    }
    if (t.s.size() != static_cast<std::size_t>(dataset.state_dim) ||
        t.s_next.size() != static_cast<std::size_t>(dataset.state_dim) ||
        t.a.size() != static_cast<std::size_t>(dataset.action_dim) ||
        t.cost_vector.size() != static_cast<std::size_t>(dataset.num_costs)) {
      throw DataFormatError("load_dataset: dimension inconsistency at line " +
                            std::to_string(line_number));
    }
    dataset.transitions.push_back(std::move(t));
  }

  if (dataset.transitions.size() != count) {
    throw DataFormatError(
        "load_dataset: count mismatch (header says " + std::to_string(count) +
        ", found " + std::to_string(dataset.transitions.size()) + ")");
  }
  return dataset;
}

NormalizationStats compute_normalization(const OfflineDataset& dataset) {
  if (dataset.transitions.empty()) {
    throw UsageError("compute_normalization: empty dataset");
  }
  const auto sd = static_cast<std::size_t>(dataset.state_dim);
  const auto ad = static_cast<std::size_t>(dataset.action_dim);

  NormalizationStats stats;
  stats.state_mean.assign(sd, 0.0);
  stats.state_std.assign(sd, 0.0);
  stats.action_mean.assign(ad, 0.0);
  stats.action_std.assign(ad, 0.0);

  // States pool s and s_next.
  const double n_states = 2.0 * static_cast<double>(dataset.size());
  const double n = static_cast<double>(dataset.size());
  for (const Transition& t : dataset.transitions) {
    for (std::size_t i = 0; i < sd; ++i) {
      stats.state_mean[i] += t.s[i] + t.s_next[i];
    }
    for (std::size_t i = 0; i < ad; ++i) stats.action_mean[i] += t.a[i];
    stats.reward_mean += t.r;
  }
  for (std::size_t i = 0; i < sd; ++i) stats.state_mean[i] /= n_states;
  for (std::size_t i = 0; i < ad; ++i) stats.action_mean[i] /= n;
  stats.reward_mean /= n;

  double reward_var = 0.0;
  for (const Transition& t : dataset.transitions) {
    for (std::size_t i = 0; i < sd; ++i) {
      const double d1 = t.s[i] - stats.state_mean[i];
      const double d2 = t.s_next[i] - stats.state_mean[i];
      stats.state_std[i] += d1 * d1 + d2 * d2;
    }
    for (std::size_t i = 0; i < ad; ++i) {
      const double d = t.a[i] - stats.action_mean[i];
      stats.action_std[i] += d * d;
    }
    const double dr = t.r - stats.reward_mean;
    reward_var += dr * dr;
  }
  for (std::size_t i = 0; i < sd; ++i) {
    stats.state_std[i] = std::max(std::sqrt(stats.state_std[i] / n_states), 1e-6);
  }
  for (std::size_t i = 0; i < ad; ++i) {
    stats.action_std[i] = std::max(std::sqrt(stats.action_std[i] / n), 1e-6);
  }
  stats.reward_std = std::max(std::sqrt(reward_var / n), 1e-6);
  return stats;
}

std::vector<std::size_t> sample_batch_indices(std::size_t dataset_size,
                                              std::size_t batch_size, Rng& rng) {
  if (dataset_size == 0) throw UsageError("sample_batch: empty dataset");
  if (batch_size < 1) throw UsageError("sample_batch: batch_size must be >= 1");
  std::vector<std::size_t> indices(batch_size);
  for (auto& idx : indices) {
    idx = static_cast<std::size_t>(rng.uniform_index(dataset_size));
  }
  return indices;
}

std::vector<Transition> sample_batch(const OfflineDataset& dataset,
                                     std::size_t batch_size, Rng& rng) {
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t idx : sample_batch_indices(dataset.size(), batch_size, rng)) {
    batch.push_back(dataset.transitions[idx]);
  }
  return batch;
}

double nearest_rank_percentile(std::vector<double> values, double beta) {
  if (values.empty()) throw UsageError("nearest_rank_percentile: empty array");
  if (beta <= 0.0 || beta > 100.0) {
    throw UsageError("nearest_rank_percentile: beta must be in (0, 100]");
  }
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(beta / 100.0 * n));
  rank = std::min(std::max<std::size_t>(rank, 1), values.size());
  return values[rank - 1];
}

std::uint64_t fnv1a_hash(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  return fnv1a_hash(text.data(), text.size());
}

std::uint64_t hash_doubles(const std::vector<double>& values) {
  return fnv1a_hash(values.data(), values.size() * sizeof(double));
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("hash_file: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hash(ss.str());
}

}  // namespace more
