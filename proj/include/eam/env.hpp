#pragma once

// Seeded synthetic GUI environments (ground-truth graph plus tasks), an
// oracle-driven depth-first exploration loop, and random MDP generators.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eam/graph.hpp"
#include "eam/mdp.hpp"

namespace eam {

struct SynthEnvConfig {
  int branching = 3;  // K
  int depth = 3;      // levels of navigation below the root
  int goal_count = 1;
  double dag_merge_prob = 0.0;
  std::uint64_t seed = 0;
  int feature_dim = 16;
  int distractors = 1;  // non-actionable elements per page
  // Single-action confirmation states inserted after every navigation step;
  // they create recurring two-step sub-chains.
  int forced_steps = 0;

  bool operator==(const SynthEnvConfig&) const = default;
};

void check_config(const SynthEnvConfig& cfg);

struct Task {
  std::string id;
  std::string instruction;
  std::set<std::string> goals;
  Path optimal;

  bool operator==(const Task&) const = default;
};

struct SynthEnv {
  SynthEnvConfig config;
  std::shared_ptr<const KnowledgeGraph> truth;
  std::string root;
  int horizon = 0;  // actions on every root-to-leaf path
  std::vector<Task> tasks;

  const Task& task(const std::string& id) const;
  std::vector<std::string> leaves() const;
  bool operator==(const SynthEnv& other) const;
};

SynthEnv generate_env(const SynthEnvConfig& cfg);

struct TaskList {
  std::vector<Task> tasks;
  std::optional<std::string> warning;
};

/// Up to n tasks with distinct goal leaves in seeded order.
TaskList make_tasks(const SynthEnv& env, int n, std::uint64_t seed);

/// Task bound to a graph (the truth by default, or a merged KG sharing ids).
KgMdp task_mdp(const SynthEnv& env, const Task& task, std::shared_ptr<const KnowledgeGraph> graph = nullptr);

/// The stored optimal path when it is still a successful path of m, otherwise
/// the shortest successful path of m (group-augmented or explored graphs);
/// nullopt when m has no success.
std::optional<Path> reference_path(const KgMdp& m, const Task& task);

enum class ExplorationOutcome { CONTINUE, BACKTRACK, COMPLETE };
std::string to_string(ExplorationOutcome o);

struct ExploreConfig {
  int k = 3;          // candidate sub-goals per state
  int max_depth = 0;  // 0: the environment horizon
  int budget = 1000;  // forward environment steps
  std::uint64_t seed = 0;
  double p_flip = 0.0;  // per adjacent pair, probability of swapping ranks
};

struct ExplorationResult {
  std::vector<Trajectory> trajectories;
  std::vector<ExplorationOutcome> outcomes;  // outcome of each trajectory's last step
  int steps = 0;
};

ExplorationResult dfs_explore(const SynthEnv& env, const Task& task, const ExploreConfig& cfg);

StateObservation observe(const KnowledgeGraph& g, const std::string& state_id);
ActionRecord record_action(const KnowledgeGraph& g, const std::string& action_id);

/// Random finite-horizon MDPs for property suites. States are layered by
/// depth so every path to a state has the same length.
struct RandomMdpConfig {
  int max_branching = 5;
  int horizon = 8;
  double early_terminal_prob = 0.2;
  double goal_prob = 0.3;
  double dag_merge_prob = 0.0;
  std::uint64_t seed = 0;
};

KgMdp random_mdp(const RandomMdpConfig& cfg);

}  // namespace eam
