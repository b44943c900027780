#include "eam/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace eam {

double ExactOracleQ::evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                              std::span<const std::string> history) const {
  return values_.q(state, action, m.horizon - static_cast<int>(history.size()));
}

double NoisyOracleQ::evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                              std::span<const std::string> history) const {
  const int remaining = m.horizon - static_cast<int>(history.size());
  const double exact = oracle_.values().q(state, action, remaining);
  double bias = 0.0;
  if (mode_ == BiasMode::random) {
    const std::uint64_t h =
        fnv1a64(state + "|" + action + "|" + std::to_string(history.size()), seed_);
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    bias = eps_ * (2.0 * u - 1.0);
  } else {
    const auto actions = m.graph->available_actions(state);
    std::string best;
    double best_q = -1.0;
    for (const auto& a : actions) {
      const double v = oracle_.values().q(state, a, remaining);
      if (v > best_q) {
        best_q = v;
        best = a;
      }
    }
    bias = action == best ? -eps_ : eps_;
  }
  return std::clamp(exact + bias, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

std::vector<int> SearchTree::lineage(int node) const {
  std::vector<int> out;
  for (int n = node; n > 0; n = nodes[static_cast<std::size_t>(n)].parent) out.push_back(n);
  std::reverse(out.begin(), out.end());
  return out;
}

Path SearchTree::path_to(int node) const {
  Path p;
  p.states.push_back(root().next_state);
  for (int n : lineage(node)) {
    const auto& sn = nodes[static_cast<std::size_t>(n)];
    p.actions.push_back(sn.action);
    p.states.push_back(sn.next_state);
  }
  return p;
}

double uct(const SearchNode& node, std::int64_t parent_visits, double c) {
  if (node.visits == 0) return std::numeric_limits<double>::infinity();
  if (c == 0.0) return node.q;
  const double n_s = static_cast<double>(std::max<std::int64_t>(parent_visits, 1));
  return node.q + c * std::sqrt(std::log(n_s) / static_cast<double>(node.visits));
}

void backprop(SearchTree& tree, int leaf, double value) {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= tree.nodes.size()) {
    throw Error(ErrorCode::invalid_argument, "backprop: leaf not in tree");
  }
  tree.nodes[static_cast<std::size_t>(leaf)].evaluations += 1;
  int n = leaf;
  for (std::size_t guard = 0; n >= 0; ++guard) {
    if (guard > tree.nodes.size()) throw Error(ErrorCode::invalid_argument, "backprop: detached leaf");
    auto& node = tree.nodes[static_cast<std::size_t>(n)];
    node.visits += 1;
    node.value_sum += value;
    if (n != 0) node.q += (value - node.q) / static_cast<double>(node.visits);
    if (n != 0 && (node.parent < 0 || static_cast<std::size_t>(node.parent) >= tree.nodes.size())) {
      throw Error(ErrorCode::invalid_argument, "backprop: detached leaf");
    }
    n = n == 0 ? -1 : node.parent;
  }
}

namespace {

void expand(SearchTree& tree, int index, const KgMdp& m, const QFunction& qf, int horizon) {
  const auto& g = *m.graph;
  const std::vector<std::string> history = [&] {
    std::vector<std::string> h;
    for (int n : tree.lineage(index)) h.push_back(tree.nodes[static_cast<std::size_t>(n)].action);
    return h;
  }();
  const std::string state = tree.nodes[static_cast<std::size_t>(index)].next_state;
  const int depth = tree.nodes[static_cast<std::size_t>(index)].depth + 1;
  std::vector<int> children;
  for (const auto& a : g.available_actions(state)) {
    SearchNode child;
    child.state = state;
    child.action = a;
    child.next_state = g.target_of(a);
    child.parent = index;
    child.depth = depth;
    child.prior = std::clamp(qf.evaluate(m, state, a, history), 0.0, 1.0);
    child.q = child.prior;
    child.goal_terminal = g.is_terminal(child.next_state);
    child.terminal = child.goal_terminal || depth >= horizon;
    child.reward = child.goal_terminal ? m.terminal_reward(child.next_state) : 0.0;
    children.push_back(static_cast<int>(tree.nodes.size()));
    tree.nodes.push_back(std::move(child));
  }
  auto& node = tree.nodes[static_cast<std::size_t>(index)];
  node.children = std::move(children);
  node.expanded = true;
}

int select_child(const SearchTree& tree, int index, double c) {
  const auto& node = tree.nodes[static_cast<std::size_t>(index)];
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int child : node.children) {
    const double score = uct(tree.nodes[static_cast<std::size_t>(child)], node.visits, c);
    if (best < 0 || score > best_score) {
      best = child;
      best_score = score;
    }
  }
  return best;
}

}  // namespace

SearchTree run_mcts(const KgMdp& m, const QFunction& qf, const MctsConfig& cfg) {
  if (cfg.iterations < 1) throw Error(ErrorCode::invalid_argument, "MCTS needs at least one iteration");
  if (cfg.top_k < 1) throw Error(ErrorCode::invalid_argument, "top_k must be >= 1");
  if (cfg.c < 0.0) throw Error(ErrorCode::invalid_argument, "exploration constant must be >= 0");
  const int horizon = cfg.horizon.value_or(m.horizon);
  if (horizon < 1) throw Error(ErrorCode::invalid_argument, "horizon must be >= 1");

  SearchTree tree;
  tree.instruction = m.instruction;
  SearchNode root;
  root.state = m.root;
  root.next_state = m.root;
  tree.nodes.push_back(std::move(root));
  if (m.graph->is_terminal(m.root)) {
    tree.nodes[0].terminal = true;
    tree.nodes[0].goal_terminal = true;
    tree.nodes[0].reward = m.terminal_reward(m.root);
    tree.note = "root state is terminal";
    return tree;
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].expanded &&
           !tree.nodes[static_cast<std::size_t>(node)].children.empty()) {
      node = select_child(tree, node, cfg.c);
    }
    auto& leaf = tree.nodes[static_cast<std::size_t>(node)];
    double value = 0.0;
    if (node == 0) {
      expand(tree, 0, m, qf, horizon);
    } else if (leaf.terminal) {
      value = leaf.reward;
    } else {
      value = leaf.q;
      expand(tree, node, m, qf, horizon);
    }
    backprop(tree, node, value);
    tree.iterations += 1;
  }
  return tree;
}

std::vector<RankedPath> extract_top_k(const SearchTree& tree, int k) {
  std::vector<RankedPath> candidates;
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (!n.goal_terminal) continue;
    RankedPath r;
    r.path = tree.path_to(static_cast<int>(i));
    double sum = 0;
    for (int idx : tree.lineage(static_cast<int>(i))) {
      const auto& sn = tree.nodes[static_cast<std::size_t>(idx)];
      r.node_q.push_back(sn.q);
      sum += sn.q;
      r.visits += sn.visits;
    }
    r.mean_q = sum / static_cast<double>(r.node_q.size());
    r.score = r.mean_q;
    candidates.push_back(std::move(r));
  }
  std::sort(candidates.begin(), candidates.end(), [](const RankedPath& a, const RankedPath& b) {
    if (a.mean_q != b.mean_q) return a.mean_q > b.mean_q;
    if (a.visits != b.visits) return a.visits > b.visits;
    return a.path < b.path;
  });
  if (k >= 0 && candidates.size() > static_cast<std::size_t>(k)) candidates.resize(static_cast<std::size_t>(k));
  return candidates;
}

Path greedy_extract(const KgMdp& m, const QFunction& qf) {
  const auto& g = *m.graph;
  Path p;
  p.states.push_back(m.root);
  for (int t = 0; t < m.horizon; ++t) {
    const std::string s = p.states.back();
    const auto actions = g.available_actions(s);
    if (actions.empty()) break;
    std::size_t best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const double v = qf.evaluate(m, s, actions[i], p.actions);
      if (v > best_q) {
        best_q = v;
        best = i;
      }
    }
    p.actions.push_back(actions[best]);
    p.states.push_back(g.target_of(actions[best]));
  }
  return p;
}

std::vector<RankedPath> best_of_n(const KgMdp& m, const QFunction& qf, int n_samples, int k, std::uint64_t seed,
                                  double temperature) {
  if (k < 1 || n_samples < k) throw Error(ErrorCode::invalid_argument, "best_of_n requires n_samples >= k >= 1");
  if (temperature < 0.0) throw Error(ErrorCode::invalid_argument, "temperature must be >= 0");
  const auto& g = *m.graph;
  std::map<Path, RankedPath> unique;
  for (int i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    RankedPath r;
    r.path.states.push_back(m.root);
    for (int t = 0; t < m.horizon; ++t) {
      const std::string s = r.path.states.back();
      const auto actions = g.available_actions(s);
      if (actions.empty()) break;
      std::vector<double> q;
      for (const auto& a : actions) q.push_back(qf.evaluate(m, s, a, r.path.actions));
      std::size_t pick = 0;
      if (temperature == 0.0) {
        pick = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
      } else {
        const double top = *std::max_element(q.begin(), q.end());
        std::vector<double> w;
        for (double v : q) w.push_back(std::exp((v - top) / temperature));
        std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
        pick = dist(rng);
      }
      r.node_q.push_back(q[pick]);
      r.path.actions.push_back(actions[pick]);
      r.path.states.push_back(g.target_of(actions[pick]));
    }
    double sum = 0;
    for (double v : r.node_q) sum += v;
    r.score = sum;
    r.mean_q = r.node_q.empty() ? 0.0 : sum / static_cast<double>(r.node_q.size());
    r.visits = 1;
    if (auto it = unique.find(r.path); it != unique.end()) {
      it->second.visits += 1;
    } else {
      unique.emplace(r.path, std::move(r));
    }
  }
  std::vector<RankedPath> ranked;
  for (auto& [_, r] : unique) ranked.push_back(std::move(r));
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedPath& a, const RankedPath& b) { return a.score > b.score; });
  if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));
  return ranked;
}

std::vector<BellmanTarget> bellman_targets(const SearchTree& tree, const KgMdp& m) {
  (void)m;
  std::vector<double> target(tree.nodes.size(), 0.0);
  // Children always have larger indices than their parent.
  for (std::size_t i = tree.nodes.size(); i-- > 1;) {
    const auto& n = tree.nodes[i];
    double v = n.prior;
    if (n.terminal) {
      v = n.reward;
    } else if (n.expanded && !n.children.empty()) {
      double sum = 0;
      for (int c : n.children) sum += target[static_cast<std::size_t>(c)];
      v = sum / static_cast<double>(n.children.size());
    }
    target[i] = std::clamp(v, 0.0, 1.0);
  }
  std::vector<BellmanTarget> out;
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    BellmanTarget t;
    t.node = static_cast<int>(i);
    t.state = n.state;
    t.action = n.action;
    for (int idx : tree.lineage(n.parent)) t.history.push_back(tree.nodes[static_cast<std::size_t>(idx)].action);
    t.target = target[i];
    out.push_back(std::move(t));
  }
  return out;
}

std::map<std::pair<std::string, std::string>, double> bellman_target_map(const std::vector<BellmanTarget>& targets) {
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, double>> best;
  for (const auto& t : targets) {
    auto key = std::make_pair(t.state, t.action);
    auto it = best.find(key);
    if (it == best.end() || t.history.size() < it->second.first) best[key] = {t.history.size(), t.target};
  }
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [k, v] : best) out[k] = v.second;
  return out;
}

std::vector<RankedPath> identity_post_processor(std::vector<RankedPath> plans) { return plans; }

}  // namespace eam
