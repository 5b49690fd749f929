#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "more/dataset.hpp"
#include "more/rng.hpp"

namespace more {

// Constrained-MDP parameters of the synthetic BoilerSim benchmark.
struct CmdpSpec {
  int state_dim = 6;
  int action_dim = 3;
  double gamma = 0.99;
  double cost_limit = 1000.0;            // l
  double reward_weight_alpha_r = 0.8;    // alpha_r
  std::vector<double> cost_weights{1.0, 1.0, 0.5};
  int episode_length = 200;

  void validate() const;
  bool operator==(const CmdpSpec&) const = default;
};

std::string cmdp_spec_to_json(const CmdpSpec& spec);
CmdpSpec cmdp_spec_from_json(const std::string& text);

struct BoilerState {
  double fuel_valve = 0.5;          // f
  double air_valve = 0.5;           // x
  double water_valve = 0.5;         // w
  double furnace_temperature = 0.5; // T
  double steam_pressure = 0.5;      // P
  double demand_load = 0.5;         // d
  int step_index = 0;
};

// Observation layout: (f, x, w, T, P, d).
std::vector<double> observe(const BoilerState& state);

struct StepResult {
  BoilerState next;
  double reward = 0.0;
  std::vector<double> cost_vector;
  double combined_cost = 0.0;
  bool done = false;
  int clipped_action_components = 0;
};

// Valves uniform in [0.3, 0.7] (drawn f, x, w in that order), T = P = d = 0.5.
BoilerState env_reset(const CmdpSpec& spec, std::uint64_t seed);

// Transition with the furnace-temperature noise term pinned by the caller.
// Actions outside [-1, 1] are clipped (counted in the result); non-finite
// actions are rejected.
StepResult env_step_with_noise(const BoilerState& state,
                               const std::vector<double>& action,
                               const CmdpSpec& spec, double temperature_noise);

// Draws the noise term Normal(0, 0.01^2) from the given stream.
StepResult env_step(const BoilerState& state, const std::vector<double>& action,
                    const CmdpSpec& spec, Rng& noise_rng);

enum class BehaviorKind { medium, mixed };

struct BehaviorPolicyConfig {
  BehaviorKind kind = BehaviorKind::medium;
  // One std for medium; a strictly decreasing list for mixed (one entry per
  // equally sized chunk of the generated dataset).
  std::vector<double> exploration_stds{0.3};
  std::uint64_t seed = 0;

  void validate() const;
};

// Proportional controller toward (air 0.6, fuel*water -> demand, water 0.5)
// plus Gaussian exploration noise, clipped to [-1, 1].
std::vector<double> behavior_action(const BoilerState& state,
                                    double exploration_std, Rng& noise_rng);

// Rolls whole episodes until at least num_transitions are collected (so the
// result is padded up to a full episode). Deterministic per arguments.
OfflineDataset generate_dataset(const CmdpSpec& spec,
                                const BehaviorPolicyConfig& config,
                                std::size_t num_transitions, std::uint64_t seed);

using Policy = std::function<std::vector<double>(const std::vector<double>& obs)>;

struct EvalResult {
  double mean_return = 0.0;
  double mean_discounted_return = 0.0;
  double mean_discounted_cost = 0.0;
  std::vector<double> episode_returns;
  std::vector<double> episode_discounted_returns;
  std::vector<double> episode_discounted_costs;
  int aborted_episodes = 0;
};

// Monte-Carlo evaluation over fresh true-environment episodes. Episodes in
// which the policy emits non-finite actions are aborted and excluded from the
// means (counted in aborted_episodes).
EvalResult evaluate_policy(const Policy& policy, const CmdpSpec& spec,
                           int num_episodes, std::uint64_t seed);

// Same loop with the transition function injected (stubbed dynamics in tests).
using StepFn = std::function<StepResult(const BoilerState&,
                                        const std::vector<double>&, Rng&)>;
EvalResult evaluate_policy_with(const Policy& policy, const CmdpSpec& spec,
                                int num_episodes, std::uint64_t seed,
                                const StepFn& step);

}  // namespace more
