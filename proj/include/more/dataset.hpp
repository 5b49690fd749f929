#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "more/rng.hpp"

namespace more {

// One (s, a, r, c_1..m, c_comb, s', done) record.
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> cost_vector;
  double combined_cost = 0.0;
  std::vector<double> s_next;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

// Per-dimension standardization statistics. Stds are floored at 1e-6.
struct NormalizationStats {
  std::vector<double> state_mean, state_std;
  std::vector<double> action_mean, action_std;
  double reward_mean = 0.0, reward_std = 1.0;

  bool operator==(const NormalizationStats&) const = default;
};

struct OfflineDataset {
  std::vector<Transition> transitions;
  int state_dim = 0;
  int action_dim = 0;
  int num_costs = 0;
  NormalizationStats normalization;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return transitions.size(); }
  bool operator==(const OfflineDataset&) const = default;
};

// Sensitivity / density cutoffs derived from nearest-rank percentiles of
// arrays pre-evaluated over the whole dataset.
struct PercentileThresholds {
  double sensitivity_threshold = 0.0;  // l_u
  double density_threshold = 0.0;      // l_p
  double beta_u = 0.0;
  double beta_p = 0.0;
  std::uint64_t sensitivity_array_hash = 0;
  std::uint64_t elbo_array_hash = 0;
  std::uint64_t dynamics_hash = 0;
  std::uint64_t vae_hash = 0;
};

// Newline-delimited text format, magic "MOREDS1". Line 1 is a header object,
// every further line one transition. Throws DataFormatError on magic, count
// or dimension violations (malformed lines are reported with their number).
void save_dataset(const OfflineDataset& dataset, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

// Mean / population std over states (s and s_next pooled), actions, rewards.
// Requires a nonempty dataset.
NormalizationStats compute_normalization(const OfflineDataset& dataset);

// Uniform with replacement; indices drawn from the caller's rng.
std::vector<std::size_t> sample_batch_indices(std::size_t dataset_size,
                                              std::size_t batch_size, Rng& rng);
std::vector<Transition> sample_batch(const OfflineDataset& dataset,
                                     std::size_t batch_size, Rng& rng);

// Nearest-rank percentile: sorts ascending and returns the element at index
// ceil(beta/100 * n) - 1. beta must be in (0, 100], values nonempty.
double nearest_rank_percentile(std::vector<double> values, double beta);

// FNV-1a over bytes; used for dataset / checkpoint / config fingerprints.
std::uint64_t fnv1a_hash(const void* data, std::size_t size);
std::uint64_t fnv1a_hash(const std::string& text);
std::uint64_t hash_doubles(const std::vector<double>& values);
std::uint64_t hash_file(const std::string& path);

}  // namespace more
