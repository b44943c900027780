#pragma once

// Finite-horizon MDP induced by a knowledge graph plus an instruction, and the
// exact quantities the planner is checked against: uniform-policy Q values,
// greedy paths, brute-force optima, critical sets, action gaps and the
// simulation budget bound.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "eam/graph.hpp"

namespace eam {

using RewardPredicate = std::function<bool(const StateNode&)>;

RewardPredicate goal_set_reward(std::set<std::string> goals);
/// Default predicate for real graphs: keyword contained in the page descriptor.
RewardPredicate keyword_reward(std::string keyword);

struct KgMdp {
  std::shared_ptr<const KnowledgeGraph> graph;
  std::string instruction;
  RewardPredicate reward;
  int horizon = 1;
  std::string root;

  /// R(s) for a terminal state, 0 for a non-terminal one.
  double terminal_reward(const std::string& state_id) const;
};

KgMdp make_mdp(std::shared_ptr<const KnowledgeGraph> graph, std::string instruction, RewardPredicate reward,
               int horizon, std::string root);

struct Path {
  std::vector<std::string> states;   // s0 ... sn
  std::vector<std::string> actions;  // a0 ... a(n-1)

  auto operator<=>(const Path&) const = default;
  bool operator==(const Path&) const = default;
};

std::string to_string(const Path& p);
/// 1 when the path ends in a terminal state the reward accepts.
double path_reward(const KgMdp& m, const Path& p);
/// Throws invalid_argument unless p starts at the root and follows graph edges.
void check_path(const KgMdp& m, const Path& p);

/// Exact Q^{π_u} indexed by remaining horizon, computed bottom-up over every
/// (state, remaining) pair reachable from the root. Immutable once built.
class ExactValues {
 public:
  explicit ExactValues(const KgMdp& m);

  /// Q(s, a) with `remaining` steps left before taking a (remaining >= 1).
  double q(const std::string& state, const std::string& action, int remaining) const;
  /// Mean of q over A(s); 0 for terminal states.
  double v(const std::string& state, int remaining) const;
  const KgMdp& mdp() const noexcept { return m_; }

 private:
  KgMdp m_;
  std::map<std::pair<std::string, int>, double> values_;
};

struct QTable {
  std::map<std::pair<std::string, std::string>, double> values;

  double at(const std::string& s, const std::string& a) const;
  bool contains(const std::string& s, const std::string& a) const { return values.contains({s, a}); }
};

/// Shortest distance (in actions) from the root to every reachable state.
std::map<std::string, int> min_depths(const KgMdp& m);

/// Q^{π_u} for every (s, a) reachable within the horizon, evaluated at the
/// state's shallowest depth. Throws cyclic_graph for cyclic graphs.
QTable uniform_q(const KgMdp& m);

/// argmax_a Q(s, a) from the root until terminal or horizon; ties go to the
/// smallest action id.
Path greedy_path(const QTable& q, const KgMdp& m);

struct OptimalResult {
  double best_reward = 0;
  std::vector<Path> successes;  // sorted
  std::size_t paths_enumerated = 0;
};

/// Exhaustive enumeration of root paths of length <= H (guard: 10^6 paths).
OptimalResult brute_force_optimal(const KgMdp& m, std::size_t max_paths = 1000000);

struct CriticalSet {
  std::set<std::pair<std::string, std::string>> entries;
};

struct GapReport {
  std::vector<double> gaps;
  double delta_min = 1.0;

  double effective(double eps_bias) const { return delta_min - 2.0 * eps_bias; }
};

CriticalSet critical_set(const KgMdp& m, const Path& tau_star);
/// Per-step action gaps along tau_star; single-action steps count as 1.
GapReport min_gap(const QTable& q, const KgMdp& m, const Path& tau_star);
/// Same, with depth-aware exact values (correct on DAGs with shared states).
GapReport min_gap(const ExactValues& values, const Path& tau_star);

/// One uniform-random continuation after taking a at s; returns the terminal
/// reward. `remaining` counts the steps available including a.
double rollout_uniform(const KgMdp& m, const std::string& s, const std::string& a, int remaining,
                       std::uint64_t seed);
/// Uses the state's shallowest depth for the remaining horizon.
double rollout_uniform(const KgMdp& m, const std::string& s, const std::string& a, std::uint64_t seed);

/// Smallest n with n >= 32(K-1)c^2 ln(Hn/delta)/delta_eff^2 + 2(K-1)(2 N0 + pi^2/3),
/// by fixed-point iteration from n = 1.
std::int64_t simulation_budget(int K, double c, double delta_eff, int H, double delta, double N0 = 1.0);

}  // namespace eam
