#pragma once

// Q-guided Monte Carlo Tree Search over a knowledge-graph MDP, top-K plan
// extraction, greedy and best-of-N baselines, and bottom-up Bellman targets.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eam/mdp.hpp"
#include "eam/qfunction.hpp"

namespace eam {

struct SearchNode {
  std::string state;       // s_t, where the action is taken (root: s0)
  std::string action;      // a_t (empty for the root h0 = (x, s0))
  std::string next_state;  // T(s_t, a_t) (root: s0)
  int parent = -1;
  std::vector<int> children;  // ordered by action id
  int depth = 0;              // actions from the root
  std::int64_t visits = 0;
  double q = 0.0;
  double prior = 0.0;  // value from the Q-model at expansion
  double value_sum = 0.0;
  std::int64_t evaluations = 0;  // iterations whose selected leaf was this node
  bool expanded = false;
  bool terminal = false;       // next_state terminal or horizon reached
  bool goal_terminal = false;  // next_state is a terminal state of the graph
  double reward = 0.0;         // true reward when terminal
};

struct SearchTree {
  std::string instruction;
  std::vector<SearchNode> nodes;  // nodes[0] is the root
  int iterations = 0;
  std::string note;

  const SearchNode& root() const { return nodes.front(); }
  /// Node indices from the root's first child down to `node`.
  std::vector<int> lineage(int node) const;
  Path path_to(int node) const;
};

struct MctsConfig {
  int iterations = 50;  // M
  double c = 10.0;
  int top_k = 5;  // K
  std::optional<int> horizon;  // overrides the MDP horizon when set
  std::uint64_t seed = 0;
};

/// Q + c sqrt(ln N(s) / N(s, a)); +inf for unvisited nodes.
double uct(const SearchNode& node, std::int64_t parent_visits, double c);

/// Incremental averaging from `leaf` up to the root.
void backprop(SearchTree& tree, int leaf, double value);

SearchTree run_mcts(const KgMdp& m, const QFunction& qf, const MctsConfig& cfg);

struct RankedPath {
  Path path;
  std::vector<double> node_q;
  double mean_q = 0.0;
  double score = 0.0;  // ranking key (mean Q for MCTS, cumulative Q for best-of-N)
  std::int64_t visits = 0;

  bool operator==(const RankedPath&) const = default;
};

/// Root-to-terminal traces ranked by mean node Q, then visits, then path.
std::vector<RankedPath> extract_top_k(const SearchTree& tree, int k);

/// argmax of qf at every step (ties: smallest action id).
Path greedy_extract(const KgMdp& m, const QFunction& qf);

/// Samples from softmax(qf / temperature) per step and ranks by cumulative Q.
/// temperature == 0 selects the argmax.
std::vector<RankedPath> best_of_n(const KgMdp& m, const QFunction& qf, int n_samples = 10, int k = 5,
                                  std::uint64_t seed = 0, double temperature = 1.0);

struct BellmanTarget {
  int node = 0;
  std::string state;
  std::string action;
  std::vector<std::string> history;  // actions before this one
  double target = 0.0;
};

/// Leaf-to-root uniform backup over the search tree, clamped to [0, 1].
std::vector<BellmanTarget> bellman_targets(const SearchTree& tree, const KgMdp& m);
/// (state, action) -> target, keeping the shallowest occurrence.
std::map<std::pair<std::string, std::string>, double> bellman_target_map(const std::vector<BellmanTarget>& targets);

/// Hook standing in for the final plan filtering step; identity by default.
using PlanPostProcessor = std::function<std::vector<RankedPath>(std::vector<RankedPath>)>;
std::vector<RankedPath> identity_post_processor(std::vector<RankedPath> plans);

}  // namespace eam
