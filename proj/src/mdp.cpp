#include "eam/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

namespace eam {

RewardPredicate goal_set_reward(std::set<std::string> goals) {
  return [goals = std::move(goals)](const StateNode& s) { return goals.contains(s.state_id); };
}

RewardPredicate keyword_reward(std::string keyword) {
  return [keyword = std::move(keyword)](const StateNode& s) {
    return !keyword.empty() && s.page_descriptor.find(keyword) != std::string::npos;
  };
}

double KgMdp::terminal_reward(const std::string& state_id) const {
  if (!graph->is_terminal(state_id)) return 0.0;
  return reward(graph->state(state_id)) ? 1.0 : 0.0;
}

KgMdp make_mdp(std::shared_ptr<const KnowledgeGraph> graph, std::string instruction, RewardPredicate reward,
               int horizon, std::string root) {
  if (!graph) throw Error(ErrorCode::invalid_argument, "mdp without graph");
  if (horizon < 1) throw Error(ErrorCode::invalid_argument, "horizon must be >= 1");
  if (!graph->has_state(root)) throw Error(ErrorCode::not_found, "unknown root state " + root);
  if (!reward) throw Error(ErrorCode::invalid_argument, "mdp without reward predicate");
  return KgMdp{std::move(graph), std::move(instruction), std::move(reward), horizon, std::move(root)};
}

std::string to_string(const Path& p) {
  std::string out = "<";
  for (std::size_t i = 0; i < p.states.size(); ++i) {
    if (i > 0) out += "," + p.actions[i - 1] + ",";
    out += p.states[i];
  }
  return out + ">";
}

void check_path(const KgMdp& m, const Path& p) {
  if (p.states.empty() || p.states.size() != p.actions.size() + 1) {
    throw Error(ErrorCode::invalid_argument, "path must alternate states and actions");
  }
  if (p.states.front() != m.root) throw Error(ErrorCode::invalid_argument, "path does not start at the root");
  for (std::size_t t = 0; t < p.actions.size(); ++t) {
    const auto& g = *m.graph;
    if (!g.has_action(p.actions[t]) || g.source_of(p.actions[t]) != p.states[t] ||
        g.target_of(p.actions[t]) != p.states[t + 1]) {
      throw Error(ErrorCode::invalid_argument, "path step " + std::to_string(t) + " is not a graph edge");
    }
  }
}

double path_reward(const KgMdp& m, const Path& p) {
  if (p.states.empty()) return 0.0;
  return m.terminal_reward(p.states.back());
}

// ---------------------------------------------------------------------------

ExactValues::ExactValues(const KgMdp& m) : m_(m) {
  if (!topological_states(*m.graph)) throw Error(ErrorCode::cyclic_graph, "uniform Q requires an acyclic graph");
  const auto& g = *m.graph;
  // Collect reachable (state, remaining) pairs, then fill in order of
  // increasing remaining horizon so every successor value is ready.
  std::map<int, std::set<std::string>> by_remaining;
  std::set<std::pair<std::string, int>> seen;
  std::deque<std::pair<std::string, int>> queue{{m.root, m.horizon}};
  seen.insert(queue.front());
  while (!queue.empty()) {
    auto [s, h] = queue.front();
    queue.pop_front();
    by_remaining[h].insert(s);
    if (h <= 1) continue;
    for (const auto& a : g.available_actions(s)) {
      std::pair<std::string, int> next{g.target_of(a), h - 1};
      if (seen.insert(next).second) queue.push_back(std::move(next));
    }
  }
  for (const auto& [h, states] : by_remaining) {
    for (const auto& s : states) {
      const auto actions = g.available_actions(s);
      double sum = 0;
      for (const auto& a : actions) sum += q(s, a, h);
      values_[{s, h}] = actions.empty() ? 0.0 : sum / static_cast<double>(actions.size());
    }
  }
}

double ExactValues::q(const std::string& state, const std::string& action, int remaining) const {
  (void)state;
  if (remaining < 1) return 0.0;
  const std::string& next = m_.graph->target_of(action);
  if (m_.graph->is_terminal(next)) return m_.terminal_reward(next);
  if (remaining == 1) return 0.0;
  return v(next, remaining - 1);
}

double ExactValues::v(const std::string& state, int remaining) const {
  if (remaining < 1) return 0.0;
  auto it = values_.find({state, remaining});
  if (it != values_.end()) return it->second;
  // Pairs outside the root's reachable set: evaluate directly.
  const auto actions = m_.graph->available_actions(state);
  if (actions.empty()) return 0.0;
  double sum = 0;
  for (const auto& a : actions) sum += q(state, a, remaining);
  return sum / static_cast<double>(actions.size());
}

double QTable::at(const std::string& s, const std::string& a) const {
  auto it = values.find({s, a});
  if (it == values.end()) throw Error(ErrorCode::not_found, "missing Q entry for (" + s + ", " + a + ")");
  return it->second;
}

std::map<std::string, int> min_depths(const KgMdp& m) {
  const auto& g = *m.graph;
  std::map<std::string, int> depth{{m.root, 0}};
  std::deque<std::string> queue{m.root};
  while (!queue.empty()) {
    const std::string s = queue.front();
    queue.pop_front();
    for (const auto& a : g.available_actions(s)) {
      const std::string& t = g.target_of(a);
      if (!depth.contains(t)) {
        depth[t] = depth[s] + 1;
        queue.push_back(t);
      }
    }
  }
  return depth;
}

QTable uniform_q(const KgMdp& m) {
  const ExactValues values(m);
  QTable table;
  for (const auto& [s, d] : min_depths(m)) {
    const int remaining = m.horizon - d;
    if (remaining < 1) continue;
    for (const auto& a : m.graph->available_actions(s)) table.values[{s, a}] = values.q(s, a, remaining);
  }
  return table;
}

Path greedy_path(const QTable& q, const KgMdp& m) {
  const auto& g = *m.graph;
  Path p;
  p.states.push_back(m.root);
  for (int t = 0; t < m.horizon; ++t) {
    const std::string s = p.states.back();
    const auto actions = g.available_actions(s);
    if (actions.empty()) break;
    const std::string* best = nullptr;
    double best_q = 0;
    for (const auto& a : actions) {
      const double v = q.at(s, a);
      if (best == nullptr || v > best_q) {
        best = &a;
        best_q = v;
      }
    }
    p.actions.push_back(*best);
    p.states.push_back(g.target_of(*best));
  }
  return p;
}

OptimalResult brute_force_optimal(const KgMdp& m, std::size_t max_paths) {
  const auto& g = *m.graph;
  OptimalResult result;
  Path current;
  current.states.push_back(m.root);
  auto walk = [&](auto&& self) -> void {
    const std::string s = current.states.back();
    const auto actions = g.available_actions(s);
    if (actions.empty() || static_cast<int>(current.actions.size()) == m.horizon) {
      if (++result.paths_enumerated > max_paths) {
        throw Error(ErrorCode::size_guard, "brute-force enumeration exceeds " + std::to_string(max_paths) + " paths");
      }
      if (path_reward(m, current) > 0) result.successes.push_back(current);
      return;
    }
    for (const auto& a : actions) {
      current.actions.push_back(a);
      current.states.push_back(g.target_of(a));
      self(self);
      current.actions.pop_back();
      current.states.pop_back();
    }
  };
  walk(walk);
  std::sort(result.successes.begin(), result.successes.end());
  result.best_reward = result.successes.empty() ? 0.0 : 1.0;
  return result;
}

CriticalSet critical_set(const KgMdp& m, const Path& tau_star) {
  check_path(m, tau_star);
  CriticalSet c;
  for (std::size_t t = 0; t < tau_star.actions.size(); ++t) {
    for (const auto& a : m.graph->available_actions(tau_star.states[t])) c.entries.insert({tau_star.states[t], a});
  }
  return c;
}

namespace {

template <class QOf>
GapReport gaps_along(const KnowledgeGraph& g, const Path& tau_star, QOf&& q_of) {
  GapReport r;
  for (std::size_t t = 0; t < tau_star.actions.size(); ++t) {
    const auto& s = tau_star.states[t];
    const auto actions = g.available_actions(s);
    double gap = 1.0;
    if (actions.size() > 1) {
      double runner_up = -1.0;
      for (const auto& a : actions) {
        if (a != tau_star.actions[t]) runner_up = std::max(runner_up, q_of(s, a, t));
      }
      gap = q_of(s, tau_star.actions[t], t) - runner_up;
    }
    r.gaps.push_back(gap);
  }
  r.delta_min = r.gaps.empty() ? 1.0 : *std::min_element(r.gaps.begin(), r.gaps.end());
  return r;
}

}  // namespace

GapReport min_gap(const QTable& q, const KgMdp& m, const Path& tau_star) {
  check_path(m, tau_star);
  return gaps_along(*m.graph, tau_star,
                    [&](const std::string& s, const std::string& a, std::size_t) { return q.at(s, a); });
}

GapReport min_gap(const ExactValues& values, const Path& tau_star) {
  const auto& m = values.mdp();
  check_path(m, tau_star);
  return gaps_along(*m.graph, tau_star, [&](const std::string& s, const std::string& a, std::size_t t) {
    return values.q(s, a, m.horizon - static_cast<int>(t));
  });
}

double rollout_uniform(const KgMdp& m, const std::string& s, const std::string& a, int remaining,
                       std::uint64_t seed) {
  const auto& g = *m.graph;
  if (!g.has_action(a) || g.source_of(a) != s) {
    throw Error(ErrorCode::invalid_argument, "(" + s + ", " + a + ") is not a state-action pair");
  }
  std::mt19937_64 rng(seed);
  std::string current = g.target_of(a);
  for (int left = remaining - 1;; --left) {
    const auto actions = g.available_actions(current);
    if (actions.empty()) return m.terminal_reward(current);
    if (left <= 0) return 0.0;
    std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
    current = g.target_of(actions[pick(rng)]);
  }
}

double rollout_uniform(const KgMdp& m, const std::string& s, const std::string& a, std::uint64_t seed) {
  const auto depths = min_depths(m);
  auto it = depths.find(s);
  if (it == depths.end()) throw Error(ErrorCode::invalid_argument, "state " + s + " unreachable from the root");
  return rollout_uniform(m, s, a, m.horizon - it->second, seed);
}

std::int64_t simulation_budget(int K, double c, double delta_eff, int H, double delta, double N0) {
  if (delta_eff <= 0.0) {
    throw Error(ErrorCode::bias_inconsistent, "effective gap must be positive (bias exceeds half the action gap)");
  }
  if (K < 1 || c < 0.0 || H < 1 || !(delta > 0.0 && delta < 1.0) || N0 < 0.0) {
    throw Error(ErrorCode::invalid_argument, "simulation_budget: invalid parameters");
  }
  const double k1 = static_cast<double>(K - 1);
  const double slope = 32.0 * k1 * c * c / (delta_eff * delta_eff);
  const double burn_in = 2.0 * k1 * (2.0 * N0 + std::numbers::pi * std::numbers::pi / 3.0);
  auto rhs = [&](double n) { return slope * std::log(static_cast<double>(H) * n / delta) + burn_in; };
  std::int64_t n = 1;
  for (int iter = 0; iter < 10000; ++iter) {
    const double need = rhs(static_cast<double>(n));
    if (static_cast<double>(n) >= need) return n;
    n = std::max<std::int64_t>(n + 1, static_cast<std::int64_t>(std::ceil(need)));
  }
  throw Error(ErrorCode::invalid_argument, "simulation_budget did not converge");
}

}  // namespace eam
