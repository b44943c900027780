#include <doctest.h>

#include <cmath>
#include <set>

#include "eam/env.hpp"
#include "fixtures.hpp"

using namespace eam;

namespace {

SynthEnvConfig config(int k, int depth, std::uint64_t seed = 0) {
  SynthEnvConfig c;
  c.branching = k;
  c.depth = depth;
  c.seed = seed;
  return c;
}

void check_walk(const SynthEnv& env, const Trajectory& t) {
  const auto& g = *env.truth;
  REQUIRE(t.states.size() == t.actions.size() + 1);
  CHECK(t.states.front().observation_id == env.root);
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    const auto& a = t.actions[i].action_id;
    REQUIRE(g.has_action(a));
    CHECK(g.source_of(a) == t.states[i].observation_id);
    CHECK(g.target_of(a) == t.states[i + 1].observation_id);
  }
}

KnowledgeGraph merged(const std::vector<Trajectory>& ts) {
  KnowledgeGraph g(16);
  TemplateDescriptorProvider provider;
  for (const auto& t : ts) merge_trajectory(g, t, DedupConfig{}, provider);
  return g;
}

}  // namespace

TEST_CASE("generate_env examples") {
  SynthEnvConfig c = config(2, 2);
  const auto env = generate_env(c);
  CHECK(env.truth->states().size() == 7);
  CHECK(env.leaves().size() == 4);
  CHECK(env.tasks.size() == 1);
  CHECK(validate(*env.truth).empty());
  CHECK(generate_env(c) == env);

  SynthEnvConfig dag = config(2, 3, 5);
  dag.dag_merge_prob = 1.0;
  const auto d = generate_env(dag);
  CHECK(d.truth->states().size() < 15);
  CHECK(validate(*d.truth).empty());

  SynthEnvConfig too_many = config(2, 2);
  too_many.goal_count = 5;
  CHECK_THROWS_AS(generate_env(too_many), Error);
  CHECK_THROWS_AS(generate_env(config(1, 3)), Error);
  CHECK_THROWS_AS(generate_env(config(3, 1)), Error);
}

TEST_CASE("generated tasks have brute-force optimal paths") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthEnvConfig c = config(3, 3, seed);
    c.goal_count = 4;
    c.dag_merge_prob = 0.3;
    const auto env = generate_env(c);
    REQUIRE(env.tasks.size() == 4);
    std::set<std::set<std::string>> goals;
    for (const auto& t : env.tasks) {
      const auto m = task_mdp(env, t);
      const auto best = brute_force_optimal(m);
      CHECK(best.best_reward == 1.0);
      CHECK(path_reward(m, t.optimal) == 1.0);
      CHECK(std::find(best.successes.begin(), best.successes.end(), t.optimal) != best.successes.end());
      goals.insert(t.goals);
    }
    CHECK(goals.size() == 4);
  }
}

TEST_CASE("forced steps create single-action confirmation states") {
  SynthEnvConfig c = config(2, 2, 3);
  c.forced_steps = 1;
  const auto env = generate_env(c);
  CHECK(env.horizon == 4);
  CHECK(validate(*env.truth).empty());
  int single = 0;
  for (const auto& [id, _] : env.truth->states()) single += env.truth->available_actions(id).size() == 1 ? 1 : 0;
  CHECK(single == 6);
}

TEST_CASE("make_tasks examples") {
  const auto env = generate_env(config(2, 2, 1));
  const auto one = make_tasks(env, 1, 3);
  REQUIRE(one.tasks.size() == 1);
  CHECK_FALSE(one.warning.has_value());
  const auto m = task_mdp(env, one.tasks[0]);
  CHECK(path_reward(m, one.tasks[0].optimal) == brute_force_optimal(m).best_reward);

  const auto all = make_tasks(env, 4, 3);
  std::set<std::string> covered;
  for (const auto& t : all.tasks) covered.insert(t.goals.begin(), t.goals.end());
  const auto leaves = env.leaves();
  CHECK(covered == std::set<std::string>(leaves.begin(), leaves.end()));

  CHECK(make_tasks(env, 4, 3).tasks == all.tasks);
  const auto extra = make_tasks(env, 9, 3);
  CHECK(extra.tasks.size() == 4);
  CHECK(extra.warning.has_value());
  CHECK_THROWS_AS(make_tasks(env, 0, 3), Error);
}

TEST_CASE("dfs_explore with the goal one step away") {
  const auto env = generate_env(config(3, 2, 2));
  const auto first = env.truth->available_actions(env.root).front();
  Task task{"near", "reach", {env.truth->target_of(first)}, Path{{env.root, env.truth->target_of(first)}, {first}}};
  ExploreConfig cfg;
  cfg.k = 3;
  const auto r = dfs_explore(env, task, cfg);
  REQUIRE(r.trajectories.size() == 1);
  CHECK(r.outcomes.front() == ExplorationOutcome::COMPLETE);
  CHECK(r.trajectories.front().actions.size() == 1);
}

TEST_CASE("dfs_explore with an unreachable goal backtracks everywhere") {
  const auto env = generate_env(config(3, 3, 2));
  const Task none{"none", "nothing", {}, Path{{env.root}, {}}};
  ExploreConfig cfg;
  cfg.k = 3;
  cfg.budget = 5;
  const auto r = dfs_explore(env, none, cfg);
  CHECK(r.steps <= 5);
  CHECK_FALSE(r.trajectories.empty());
  for (auto o : r.outcomes) CHECK(o == ExplorationOutcome::BACKTRACK);
  cfg.budget = 0;
  CHECK_THROWS_AS(dfs_explore(env, none, cfg), Error);
}

TEST_CASE("noisy exploration backtracks and still recovers the optimal path") {
  const auto env = generate_env(config(2, 3, 4));
  const auto& task = env.tasks.front();
  ExploreConfig cfg;
  cfg.k = 2;
  cfg.budget = 1000;
  cfg.p_flip = 1.0;
  const auto r = dfs_explore(env, task, cfg);
  CHECK(std::count(r.outcomes.begin(), r.outcomes.end(), ExplorationOutcome::BACKTRACK) >= 1);
  CHECK(r.outcomes.back() == ExplorationOutcome::COMPLETE);
  const auto g = merged(r.trajectories);
  CHECK(validate(g).empty());
  for (const auto& a : task.optimal.actions) CHECK(g.has_action(a));
  const auto m = task_mdp(env, task, std::make_shared<const KnowledgeGraph>(g));
  CHECK(brute_force_optimal(m).best_reward == 1.0);
}

TEST_CASE("exploration is sound, bounded, covering and deterministic") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    SynthEnvConfig c = config(3, 3, seed);
    c.dag_merge_prob = 0.2;
    const auto env = generate_env(c);
    const auto& task = env.tasks.front();
    ExploreConfig cfg;
    cfg.k = 2;
    cfg.seed = seed;
    cfg.p_flip = 0.3;
    cfg.budget = 8;
    const auto r = dfs_explore(env, task, cfg);
    for (const auto& t : r.trajectories) check_walk(env, t);
    CHECK(r.steps <= cfg.budget);
    CHECK(r.trajectories.size() <= std::size_t(cfg.budget));
    CHECK(r.trajectories.size() <= std::size_t(std::pow(cfg.k, env.horizon)));
    CHECK(r.outcomes.size() == r.trajectories.size());
    CHECK(dfs_explore(env, task, cfg).trajectories == r.trajectories);

    ExploreConfig full;
    full.k = c.branching;
    full.budget = 1000000;
    full.seed = seed;
    full.p_flip = 0.5;
    const auto all = dfs_explore(env, task, full);
    const auto g = std::make_shared<const KnowledgeGraph>(merged(all.trajectories));
    const auto best = brute_force_optimal(task_mdp(env, task, g));
    REQUIRE(best.best_reward == 1.0);
    CHECK(best.successes.front().actions.size() == task.optimal.actions.size());
    for (const auto& a : best.successes.front().actions) CHECK(env.truth->has_action(a));
  }
}

TEST_CASE("observe and record_action mirror the graph") {
  const auto env = generate_env(config(2, 2, 0));
  const auto& g = *env.truth;
  const auto o = observe(g, env.root);
  CHECK(o.observation_id == env.root);
  CHECK(o.feature == g.state(env.root).feature);
  const auto a = g.available_actions(env.root).front();
  const auto r = record_action(g, a);
  CHECK(r.action_id == a);
  CHECK(r.source_element == "e:" + a);
  CHECK(to_string(ExplorationOutcome::BACKTRACK) == "BACKTRACK");
}

TEST_CASE("random_mdp is layered, acyclic and seeded") {
  RandomMdpConfig c;
  c.seed = 3;
  c.dag_merge_prob = 0.5;
  const auto m = random_mdp(c);
  CHECK(validate(*m.graph).empty());
  CHECK(*random_mdp(c).graph == *m.graph);
  CHECK_THROWS_AS(random_mdp(RandomMdpConfig{0}), Error);
}
