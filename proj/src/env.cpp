#include "more/env.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>

#include "more/errors.hpp"

namespace more {

namespace {

using nlohmann::json;

constexpr double kValveRate = 0.1;
constexpr double kTemperatureNoiseStd = 0.01;
constexpr double kControllerGain = 5.0;

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Combustion-completeness bump, maximal (1) at air valve 0.6.
double completeness(double air_valve) {
  const double d = air_valve - 0.6;
  return 1.0 - 4.0 * d * d;
}

}  // namespace

void CmdpSpec::validate() const {
  if (state_dim != 6 || action_dim != 3) {
    throw UsageError("CmdpSpec: BoilerSim has state_dim 6 and action_dim 3");
  }
  if (gamma <= 0.0 || gamma >= 1.0) throw UsageError("CmdpSpec: gamma must be in (0,1)");
  if (cost_limit < 0.0) throw UsageError("CmdpSpec: cost_limit must be >= 0");
  if (reward_weight_alpha_r < 0.0 || reward_weight_alpha_r > 1.0) {
    throw UsageError("CmdpSpec: reward_weight_alpha_r must be in [0,1]");
  }
  if (episode_length < 1) throw UsageError("CmdpSpec: episode_length must be >= 1");
  double weight_sum = 0.0;
  for (double w : cost_weights) {
    if (w < 0.0) throw UsageError("CmdpSpec: cost weights must be >= 0");
    weight_sum += w;
  }
  if (!cost_weights.empty() && weight_sum <= 0.0) {
    throw UsageError("CmdpSpec: cost weights must have positive sum");
  }
}

std::string cmdp_spec_to_json(const CmdpSpec& spec) {
  json j{{"state_dim", spec.state_dim},
         {"action_dim", spec.action_dim},
         {"gamma", spec.gamma},
         {"cost_limit", spec.cost_limit},
         {"reward_weight_alpha_r", spec.reward_weight_alpha_r},
         {"cost_weights", spec.cost_weights},
         {"episode_length", spec.episode_length}};
  return j.dump();
}

CmdpSpec cmdp_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("cmdp spec: malformed json: ") + e.what());
  }
  CmdpSpec spec;
  try {
    spec.state_dim = j.at("state_dim").get<int>();
    spec.action_dim = j.at("action_dim").get<int>();
    spec.gamma = j.at("gamma").get<double>();
    spec.cost_limit = j.at("cost_limit").get<double>();
    spec.reward_weight_alpha_r = j.at("reward_weight_alpha_r").get<double>();
    spec.cost_weights = j.at("cost_weights").get<std::vector<double>>();
    spec.episode_length = j.at("episode_length").get<int>();
  } catch (const json::exception& e) {
    throw DataFormatError(std::string("cmdp spec: bad fields: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<double> observe(const BoilerState& s) {
  return {s.fuel_valve,          s.air_valve,      s.water_valve,
          s.furnace_temperature, s.steam_pressure, s.demand_load};
}

BoilerState env_reset(const CmdpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  BoilerState state;
  state.fuel_valve = rng.uniform(0.3, 0.7);
  state.air_valve = rng.uniform(0.3, 0.7);
  state.water_valve = rng.uniform(0.3, 0.7);
  state.furnace_temperature = 0.5;
  state.steam_pressure = 0.5;
  state.demand_load = 0.5;
  state.step_index = 0;
  return state;
}

StepResult env_step_with_noise(const BoilerState& state,
                               const std::vector<double>& action,
                               const CmdpSpec& spec, double temperature_noise) {
  if (action.size() != 3) {
    throw UsageError("env_step: action must have length 3");
  }
  for (double a : action) {
    if (!std::isfinite(a)) throw UsageError("env_step: non-finite action");
  }

  StepResult result;
  std::vector<double> a = action;
  for (double& v : a) {
    if (v < -1.0 || v > 1.0) {
      v = clip(v, -1.0, 1.0);
      ++result.clipped_action_components;
    }
  }

  BoilerState& next = result.next;
  next.fuel_valve = clip(state.fuel_valve + kValveRate * a[0], 0.0, 1.0);
  next.air_valve = clip(state.air_valve + kValveRate * a[1], 0.0, 1.0);
  next.water_valve = clip(state.water_valve + kValveRate * a[2], 0.0, 1.0);

  const double g = completeness(next.air_valve);
  next.furnace_temperature = 0.88 * state.furnace_temperature +
                             0.5 * next.fuel_valve * g + temperature_noise;
  next.steam_pressure = 0.90 * state.steam_pressure +
                        0.30 * next.furnace_temperature -
                        0.25 * next.water_valve;
  next.step_index = state.step_index + 1;
  next.demand_load =
      0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * next.step_index /
                           spec.episode_length);

  const double efficiency = 0.90 + 0.04 * g - 0.02 * std::abs(next.water_valve - 0.5);
  const double emission = 1.0 - 0.4 * next.air_valve -
                          0.3 * std::max(0.0, next.furnace_temperature - 0.8);
  result.reward = spec.reward_weight_alpha_r * efficiency +
                  (1.0 - spec.reward_weight_alpha_r) * emission;

  result.cost_vector = {
      std::max(0.0, next.steam_pressure - 0.9) +
          std::max(0.0, 0.1 - next.steam_pressure),          // pressure band
      std::max(0.0, next.furnace_temperature - 1.0),         // temperature cap
      std::abs(next.fuel_valve * next.water_valve - next.demand_load)};
  result.combined_cost = 0.0;
  for (std::size_t i = 0; i < result.cost_vector.size(); ++i) {
    result.combined_cost += spec.cost_weights[i] * result.cost_vector[i];
  }
  result.done = next.step_index >= spec.episode_length;
  return result;
}

StepResult env_step(const BoilerState& state, const std::vector<double>& action,
                    const CmdpSpec& spec, Rng& noise_rng) {
  return env_step_with_noise(state, action, spec,
                             noise_rng.gaussian(0.0, kTemperatureNoiseStd));
}

void BehaviorPolicyConfig::validate() const {
  if (exploration_stds.empty()) {
    throw UsageError("behavior policy: exploration std list must be nonempty");
  }
  for (double s : exploration_stds) {
    if (s < 0.0) throw UsageError("behavior policy: stds must be >= 0");
  }
  if (kind == BehaviorKind::mixed) {
    for (std::size_t i = 1; i < exploration_stds.size(); ++i) {
      if (exploration_stds[i] >= exploration_stds[i - 1]) {
        throw UsageError("behavior policy: mixed stds must be strictly decreasing");
      }
    }
  }
}

std::vector<double> behavior_action(const BoilerState& state,
                                    double exploration_std, Rng& noise_rng) {
  std::vector<double> action = {
      kControllerGain * (state.demand_load - state.fuel_valve * state.water_valve),
      kControllerGain * (0.6 - state.air_valve),
      kControllerGain * (0.5 - state.water_valve)};
  for (double& a : action) {
    if (exploration_std > 0.0) a += noise_rng.gaussian(0.0, exploration_std);
    a = clip(a, -1.0, 1.0);
  }
  return action;
}

OfflineDataset generate_dataset(const CmdpSpec& spec,
                                const BehaviorPolicyConfig& config,
                                std::size_t num_transitions, std::uint64_t seed) {
  spec.validate();
  config.validate();
  const auto episode_length = static_cast<std::size_t>(spec.episode_length);
  if (num_transitions < episode_length) {
    throw UsageError("generate_dataset: num_transitions must cover at least one episode");
  }

  const std::size_t num_episodes =
      (num_transitions + episode_length - 1) / episode_length;
  const std::size_t total = num_episodes * episode_length;
  const std::size_t num_tiers = config.exploration_stds.size();

  OfflineDataset dataset;
  dataset.state_dim = spec.state_dim;
  dataset.action_dim = spec.action_dim;
  dataset.num_costs = static_cast<int>(spec.cost_weights.size());
  dataset.transitions.reserve(total);

  std::size_t index = 0;
  for (std::size_t episode = 0; episode < num_episodes; ++episode) {
    BoilerState state = env_reset(spec, derive_seed(seed, 1, episode));
    Rng env_rng(derive_seed(seed, 2, episode));
    Rng action_rng(derive_seed(config.seed, 3, episode));
    for (std::size_t step = 0; step < episode_length; ++step, ++index) {
      const std::size_t tier = index * num_tiers / total;
      const double std = config.exploration_stds[tier];
      const std::vector<double> action = behavior_action(state, std, action_rng);
      const StepResult result = env_step(state, action, spec, env_rng);

      Transition t;
      t.s = observe(state);
      t.a = action;
      t.r = result.reward;
      t.cost_vector = result.cost_vector;
      t.combined_cost = result.combined_cost;
      t.s_next = observe(result.next);
      t.done = result.done;
      dataset.transitions.push_back(std::move(t));
      state = result.next;
    }
  }

  dataset.normalization = compute_normalization(dataset);
  dataset.metadata["kind"] =
      config.kind == BehaviorKind::medium ? "medium" : "mixed";
  dataset.metadata["seed"] = std::to_string(seed);
  dataset.metadata["policy_seed"] = std::to_string(config.seed);
  dataset.metadata["requested_transitions"] = std::to_string(num_transitions);
  dataset.metadata["episodes"] = std::to_string(num_episodes);
  dataset.metadata["spec_hash"] =
      std::to_string(fnv1a_hash(cmdp_spec_to_json(spec)));
  std::string tiers;
  for (std::size_t i = 0; i < config.exploration_stds.size(); ++i) {
    if (i) tiers += ",";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", config.exploration_stds[i]);
    tiers += buf;
  }
  dataset.metadata["exploration_stds"] = tiers;
  return dataset;
}

EvalResult evaluate_policy(const Policy& policy, const CmdpSpec& spec,
                           int num_episodes, std::uint64_t seed) {
  return evaluate_policy_with(
      policy, spec, num_episodes, seed,
      [&spec](const BoilerState& s, const std::vector<double>& a, Rng& rng) {
        return env_step(s, a, spec, rng);
      });
}

EvalResult evaluate_policy_with(const Policy& policy, const CmdpSpec& spec,
                                int num_episodes, std::uint64_t seed,
                                const StepFn& step) {
  spec.validate();
  if (num_episodes < 1) throw UsageError("evaluate_policy: num_episodes must be >= 1");

  EvalResult result;
  for (int episode = 0; episode < num_episodes; ++episode) {
    BoilerState state =
        env_reset(spec, derive_seed(seed, 11, static_cast<std::uint64_t>(episode)));
    Rng env_rng(derive_seed(seed, 12, static_cast<std::uint64_t>(episode)));

    double episode_return = 0.0;
    double discounted_return = 0.0;
    double discounted_cost = 0.0;
    double discount = 1.0;
    bool aborted = false;

    for (int t = 0; t < spec.episode_length; ++t) {
      const std::vector<double> action = policy(observe(state));
      bool finite = action.size() == 3;
      for (double a : action) finite = finite && std::isfinite(a);
      if (!finite) {
        aborted = true;
        break;
      }
      const StepResult sr = step(state, action, env_rng);
      episode_return += sr.reward;
      discounted_return += discount * sr.reward;
      discounted_cost += discount * sr.combined_cost;
      discount *= spec.gamma;
      state = sr.next;
    }

    if (aborted) {
      ++result.aborted_episodes;
      continue;
    }
    result.episode_returns.push_back(episode_return);
    result.episode_discounted_returns.push_back(discounted_return);
    result.episode_discounted_costs.push_back(discounted_cost);
  }

  const auto n = static_cast<double>(result.episode_returns.size());
  if (n > 0) {
    for (double v : result.episode_returns) result.mean_return += v / n;
    for (double v : result.episode_discounted_returns) {
      result.mean_discounted_return += v / n;
    }
    for (double v : result.episode_discounted_costs) {
      result.mean_discounted_cost += v / n;
    }
  }
  return result;
}

}  // namespace more
