#include <doctest.h>

#include <cmath>
#include <numbers>

#include "more/env.hpp"
#include "more/errors.hpp"

using namespace more;

namespace {

CmdpSpec default_spec() {
  CmdpSpec spec;
  return spec;
}

}  // namespace

TEST_CASE("env_reset: deterministic per seed, distinct across seeds, in bounds") {
  const CmdpSpec spec = default_spec();
  const BoilerState a = env_reset(spec, 42);
  const BoilerState b = env_reset(spec, 42);
  CHECK(observe(a) == observe(b));

  int distinct = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const BoilerState s = env_reset(spec, seed);
    const BoilerState t = env_reset(spec, seed + 1);
    if (observe(s) != observe(t)) ++distinct;
    CHECK(s.fuel_valve >= 0.3);
    CHECK(s.fuel_valve <= 0.7);
    CHECK(s.air_valve >= 0.3);
    CHECK(s.air_valve <= 0.7);
    CHECK(s.water_valve >= 0.3);
    CHECK(s.water_valve <= 0.7);
    CHECK(s.furnace_temperature == 0.5);
    CHECK(s.steam_pressure == 0.5);
    CHECK(s.demand_load == 0.5);
    CHECK(s.step_index == 0);
  }
  CHECK(distinct == 100);
}

TEST_CASE("env_step: hand evaluation of the transition equations") {
  CmdpSpec spec = default_spec();
  spec.reward_weight_alpha_r = 0.8;
  spec.cost_weights = {1.0, 1.0, 0.5};

  BoilerState s;
  s.fuel_valve = s.air_valve = s.water_valve = 0.6;
  s.furnace_temperature = 0.5;
  s.steam_pressure = 0.5;
  s.step_index = 0;

  const StepResult r = env_step_with_noise(s, {0.0, 0.0, 0.0}, spec, 0.0);

  // Hand arithmetic: g = 1, T' = 0.88*0.5 + 0.5*0.6 = 0.74,
  // P' = 0.9*0.5 + 0.3*0.74 - 0.25*0.6 = 0.522,
  // d' = 0.5 + 0.3*sin(2*pi/200),
  // Effi = 0.94 - 0.02*0.1 = 0.938, Emi = 1 - 0.24 = 0.76,
  // reward = 0.8*0.938 + 0.2*0.76 = 0.9024,
  // c = (0, 0, |0.36 - d'|), combined = 0.5*c3.
  const double d_next = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi / 200.0);
  CHECK(r.next.furnace_temperature == doctest::Approx(0.74).epsilon(1e-12));
  CHECK(r.next.steam_pressure == doctest::Approx(0.522).epsilon(1e-12));
  CHECK(r.next.demand_load == doctest::Approx(d_next).epsilon(1e-12));
  CHECK(r.reward == doctest::Approx(0.9024).epsilon(1e-12));
  CHECK(r.cost_vector[0] == 0.0);
  CHECK(r.cost_vector[1] == 0.0);
  CHECK(r.cost_vector[2] == doctest::Approx(std::abs(0.36 - d_next)).epsilon(1e-12));
  CHECK(r.combined_cost ==
        doctest::Approx(0.5 * std::abs(0.36 - d_next)).epsilon(1e-12));
  CHECK_FALSE(r.done);
  CHECK(r.next.step_index == 1);
}

TEST_CASE("env_step: air valve at 0.6 gives the maximal combustion bump") {
  const CmdpSpec spec = default_spec();
  BoilerState s;
  s.fuel_valve = 0.5;
  s.water_valve = 0.5;
  s.furnace_temperature = 0.5;
  s.steam_pressure = 0.5;

  // Extract g from T' = 0.88 T + 0.5 f' g with zero noise.
  auto bump = [&](double air_start) {
    BoilerState state = s;
    state.air_valve = air_start;
    const StepResult r = env_step_with_noise(state, {0, 0, 0}, spec, 0.0);
    return (r.next.furnace_temperature - 0.88 * state.furnace_temperature) /
           (0.5 * r.next.fuel_valve);
  };
  CHECK(bump(0.6) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bump(0.45) < 1.0);
  CHECK(bump(0.75) < 1.0);
}

TEST_CASE("env_step: all hinge costs inactive in the safe band") {
  const CmdpSpec spec = default_spec();
  BoilerState s;
  // d' after one step from step_index 0:
  const double d_next = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi / 200.0);
  s.water_valve = 0.7;
  s.fuel_valve = d_next / 0.7 - 0.05;
  s.air_valve = 0.6;
  s.furnace_temperature = 0.5;
  s.steam_pressure = 0.5;
  const StepResult r = env_step_with_noise(s, {0.5, 0.0, 0.0}, spec, 0.0);
  CHECK(r.cost_vector[0] == 0.0);
  CHECK(r.cost_vector[1] == 0.0);
  CHECK(r.cost_vector[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.combined_cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("env_step: rejects non-finite actions, clips out-of-range ones") {
  const CmdpSpec spec = default_spec();
  const BoilerState s = env_reset(spec, 1);
  CHECK_THROWS_AS(
      env_step_with_noise(s, {0.0, std::nan(""), 0.0}, spec, 0.0), UsageError);
  const StepResult r = env_step_with_noise(s, {2.0, 0.0, -3.0}, spec, 0.0);
  CHECK(r.clipped_action_components == 2);
  CHECK(r.next.fuel_valve <= 1.0);
}

TEST_CASE("env_step: noiseless step is a pure function") {
  const CmdpSpec spec = default_spec();
  const BoilerState s = env_reset(spec, 9);
  const std::vector<double> a = {0.3, -0.2, 0.6};
  const StepResult r1 = env_step_with_noise(s, a, spec, 0.0);
  const StepResult r2 = env_step_with_noise(s, a, spec, 0.0);
  CHECK(observe(r1.next) == observe(r2.next));
  CHECK(r1.reward == r2.reward);
  CHECK(r1.combined_cost == r2.combined_cost);
}

TEST_CASE("env_step: reward positive and costs nonnegative over random steps") {
  const CmdpSpec spec = default_spec();
  Rng rng(2718);
  BoilerState s = env_reset(spec, 0);
  // 10^6 random steps across restarted episodes.
  for (int i = 0; i < 1000000; ++i) {
    std::vector<double> a = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-1, 1)};
    const StepResult r = env_step(s, a, spec, rng);
    if (!(r.reward > 0.0)) {
      REQUIRE(r.reward > 0.0);
    }
    for (double c : r.cost_vector) {
      if (!(c >= 0.0)) REQUIRE(c >= 0.0);
    }
    s = r.done ? env_reset(spec, static_cast<std::uint64_t>(i)) : r.next;
  }
  CHECK(true);
}

TEST_CASE("behavior_action: zero error and zero noise gives zero action") {
  BoilerState s;
  s.fuel_valve = 1.0;
  s.water_valve = 0.5;
  s.air_valve = 0.6;
  s.demand_load = 0.5;
  Rng rng(4);
  const auto a = behavior_action(s, 0.0, rng);
  CHECK(a[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("behavior_action: drives the air valve toward 0.6") {
  BoilerState s;
  s.air_valve = 0.4;
  Rng rng(4);
  CHECK(behavior_action(s, 0.0, rng)[1] > 0.0);
}

TEST_CASE("behavior_action: deterministic per (state, seed)") {
  BoilerState s;
  s.air_valve = 0.35;
  s.demand_load = 0.8;
  Rng a(55), b(55);
  CHECK(behavior_action(s, 0.4, a) == behavior_action(s, 0.4, b));
}

TEST_CASE("generate_dataset: episode accounting and determinism") {
  CmdpSpec spec = default_spec();
  spec.episode_length = 50;
  BehaviorPolicyConfig config;
  config.seed = 17;
  const OfflineDataset ds = generate_dataset(spec, config, 100, 5);
  CHECK(ds.size() == 100);
  int dones = 0;
  for (const Transition& t : ds.transitions) dones += t.done ? 1 : 0;
  CHECK(dones == 2);
  CHECK(ds.transitions[49].done);
  CHECK(ds.transitions[99].done);

  const OfflineDataset again = generate_dataset(spec, config, 100, 5);
  CHECK(again == ds);
}

TEST_CASE("generate_dataset: mixed tiers have decreasing action noise") {
  CmdpSpec spec = default_spec();
  spec.episode_length = 100;
  BehaviorPolicyConfig config;
  config.kind = BehaviorKind::mixed;
  config.exploration_stds = {0.8, 0.5, 0.3, 0.1};
  config.seed = 23;
  const OfflineDataset ds = generate_dataset(spec, config, 4000, 11);
  REQUIRE(ds.size() == 4000);

  // Mean squared deviation from the noiseless controller action, per quarter.
  std::vector<double> msd(4, 0.0);
  Rng dummy(0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    BoilerState s;
    const auto& obs = ds.transitions[i].s;
    s.fuel_valve = obs[0];
    s.air_valve = obs[1];
    s.water_valve = obs[2];
    s.furnace_temperature = obs[3];
    s.steam_pressure = obs[4];
    s.demand_load = obs[5];
    const auto clean = behavior_action(s, 0.0, dummy);
    double d2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double d = ds.transitions[i].a[static_cast<std::size_t>(j)] -
                       clean[static_cast<std::size_t>(j)];
      d2 += d * d;
    }
    msd[i / 1000] += d2 / 1000.0;
  }
  CHECK(msd[0] > msd[1]);
  CHECK(msd[1] > msd[2]);
  CHECK(msd[2] > msd[3]);
}

TEST_CASE("generate_dataset: rejects fewer transitions than one episode") {
  CmdpSpec spec = default_spec();
  BehaviorPolicyConfig config;
  CHECK_THROWS_AS(generate_dataset(spec, config, 100, 1), UsageError);
}

TEST_CASE("mixed stds must be strictly decreasing") {
  BehaviorPolicyConfig config;
  config.kind = BehaviorKind::mixed;
  config.exploration_stds = {0.5, 0.5};
  CHECK_THROWS_AS(config.validate(), UsageError);
}

TEST_CASE("evaluate_policy: stubbed constant-reward env matches geometric series") {
  CmdpSpec spec = default_spec();
  spec.gamma = 0.99;
  spec.episode_length = 200;
  const Policy policy = [](const std::vector<double>&) {
    return std::vector<double>{0.0, 0.0, 0.0};
  };
  const StepFn stub = [&spec](const BoilerState& s, const std::vector<double>&,
                              Rng&) {
    StepResult r;
    r.next = s;
    r.next.step_index = s.step_index + 1;
    r.reward = 1.0;
    r.cost_vector = {0.0, 0.0, 0.0};
    r.combined_cost = 0.0;
    r.done = r.next.step_index >= spec.episode_length;
    return r;
  };
  const EvalResult result = evaluate_policy_with(policy, spec, 3, 1, stub);
  const double expected = (1.0 - std::pow(0.99, 200)) / 0.01;
  CHECK(result.mean_discounted_return == doctest::Approx(expected).epsilon(1e-10));
  CHECK(result.mean_return == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(result.mean_discounted_cost == 0.0);
}

TEST_CASE("evaluate_policy: deterministic per seed") {
  const CmdpSpec spec = default_spec();
  const Policy policy = [](const std::vector<double>& obs) {
    BoilerState s;
    s.fuel_valve = obs[0];
    s.air_valve = obs[1];
    s.water_valve = obs[2];
    s.furnace_temperature = obs[3];
    s.steam_pressure = obs[4];
    s.demand_load = obs[5];
    Rng rng(0);
    return behavior_action(s, 0.0, rng);
  };
  const EvalResult a = evaluate_policy(policy, spec, 5, 31);
  const EvalResult b = evaluate_policy(policy, spec, 5, 31);
  CHECK(a.mean_return == b.mean_return);
  CHECK(a.mean_discounted_cost == b.mean_discounted_cost);
  CHECK(a.episode_returns == b.episode_returns);
}

TEST_CASE("evaluate_policy: aborts episodes with non-finite actions") {
  const CmdpSpec spec = default_spec();
  const Policy policy = [](const std::vector<double>&) {
    return std::vector<double>{std::nan(""), 0.0, 0.0};
  };
  const EvalResult result = evaluate_policy(policy, spec, 3, 0);
  CHECK(result.aborted_episodes == 3);
  CHECK(result.episode_returns.empty());
}

TEST_CASE("noiseless controller beats a uniform-random policy") {
  const CmdpSpec spec = default_spec();
  const Policy controller = [](const std::vector<double>& obs) {
    BoilerState s;
    s.fuel_valve = obs[0];
    s.air_valve = obs[1];
    s.water_valve = obs[2];
    s.furnace_temperature = obs[3];
    s.steam_pressure = obs[4];
    s.demand_load = obs[5];
    Rng rng(0);
    return behavior_action(s, 0.0, rng);
  };
  // Seeded random policy; fresh stream per call keeps it deterministic.
  int call = 0;
  const Policy random_policy = [&call](const std::vector<double>&) {
    Rng rng(static_cast<std::uint64_t>(++call));
    return std::vector<double>{rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1)};
  };
  const EvalResult a = evaluate_policy(controller, spec, 50, 7);
  const EvalResult b = evaluate_policy(random_policy, spec, 50, 7);
  CHECK(a.mean_return > b.mean_return);
}

TEST_CASE("cmdp spec json round trip") {
  CmdpSpec spec = default_spec();
  spec.cost_limit = 123.5;
  spec.gamma = 0.95;
  const CmdpSpec back = cmdp_spec_from_json(cmdp_spec_to_json(spec));
  CHECK(back == spec);
  CHECK_THROWS_AS(cmdp_spec_from_json("{"), DataFormatError);
}
