#include "eam/env.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace eam {

namespace {

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

struct PendingAction {
  ActionNode node;
  std::string from;
  std::string to;
};

// Layered construction shared by the environment and the random MDP generator.
struct LayeredBuilder {
  std::mt19937_64& rng;
  std::vector<StateNode> states;
  std::vector<PendingAction> actions;
  std::vector<std::vector<std::string>> layers;
  std::map<std::string, std::string> topic;  // state -> topic token
  int next_state = 0;
  int next_action = 0;

  std::string new_state(const std::string& topic_token) {
    StateNode s;
    s.state_id = "s" + std::to_string(next_state++);
    topic[s.state_id] = topic_token.empty() ? "t" + s.state_id.substr(1) : topic_token;
    states.push_back(s);
    return s.state_id;
  }

  std::string new_action(const std::string& from, const std::string& to, const std::string& descriptor) {
    PendingAction p;
    p.node.action_id = "a" + std::to_string(next_action++);
    p.node.functional_descriptor = descriptor;
    p.from = from;
    p.to = to;
    actions.push_back(p);
    return p.node.action_id;
  }

  // New children in the given layer, aliasing with probability merge_prob.
  std::vector<std::string> children(int count, double merge_prob, std::size_t layer) {
    if (layers.size() <= layer) layers.resize(layer + 1);
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
      std::vector<std::string> candidates;
      for (const auto& s : layers[layer]) {
        if (std::find(out.begin(), out.end(), s) == out.end()) candidates.push_back(s);
      }
      const bool alias = merge_prob > 0.0 && uniform01(rng) < merge_prob && !candidates.empty();
      if (alias) {
        out.push_back(candidates[pick_index(rng, candidates.size())]);
      } else {
        out.push_back(new_state(""));
        layers[layer].push_back(out.back());
      }
    }
    return out;
  }
};

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

void check_config(const SynthEnvConfig& cfg) {
  if (cfg.branching < 2) throw Error(ErrorCode::invalid_argument, "branching must be >= 2");
  if (cfg.depth < 2) throw Error(ErrorCode::invalid_argument, "depth must be >= 2");
  if (cfg.goal_count < 1) throw Error(ErrorCode::invalid_argument, "goal_count must be >= 1");
  if (!(cfg.dag_merge_prob >= 0.0 && cfg.dag_merge_prob <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "dag_merge_prob must be in [0,1]");
  }
  if (cfg.feature_dim < 1) throw Error(ErrorCode::invalid_argument, "feature_dim must be >= 1");
  if (cfg.distractors < 0 || cfg.forced_steps < 0) {
    throw Error(ErrorCode::invalid_argument, "distractors and forced_steps must be >= 0");
  }
}

const Task& SynthEnv::task(const std::string& id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return t;
  }
  throw Error(ErrorCode::not_found, "unknown task " + id);
}

std::vector<std::string> SynthEnv::leaves() const {
  std::vector<std::string> out;
  for (const auto& [id, s] : truth->states()) {
    if (s.is_terminal) out.push_back(id);
  }
  return out;
}

bool SynthEnv::operator==(const SynthEnv& other) const {
  return config == other.config && root == other.root && horizon == other.horizon && tasks == other.tasks &&
         (truth == other.truth || (truth && other.truth && *truth == *other.truth));
}

SynthEnv generate_env(const SynthEnvConfig& cfg) {
  check_config(cfg);
  std::mt19937_64 rng(cfg.seed);
  LayeredBuilder b{rng, {}, {}, {}, {}, 0, 0};
  const std::string root = b.new_state("home");
  b.layers.push_back({root});
  for (int d = 0; d < cfg.depth; ++d) {
    const auto parents = b.layers[static_cast<std::size_t>(d)];
    for (const auto& p : parents) {
      for (const auto& child : b.children(cfg.branching, cfg.dag_merge_prob, static_cast<std::size_t>(d + 1))) {
        const std::string& t = b.topic.at(child);
        std::string from = p;
        std::string desc = "open " + t;
        for (int f = 0; f < cfg.forced_steps; ++f) {
          const std::string mid = b.new_state(t);
          b.new_action(from, mid, desc);
          from = mid;
          desc = "confirm " + t;
        }
        b.new_action(from, child, desc);
      }
    }
  }

  std::map<std::string, std::vector<const PendingAction*>> outgoing;
  for (const auto& a : b.actions) outgoing[a.from].push_back(&a);
  std::set<std::string> layered;
  for (const auto& d : b.layers) {
    for (const auto& s : d) layered.insert(s);
  }

  auto g = std::make_shared<KnowledgeGraph>(cfg.feature_dim);
  const std::uint64_t feature_seed = derive_seed(cfg.seed, 7);
  for (auto& s : b.states) {
    const bool mid = !layered.contains(s.state_id);
    const std::string& t = b.topic.at(s.state_id);
    s.page_descriptor = (mid ? "confirm " : "page ") + t;
    std::vector<std::string> descs{s.page_descriptor};
    int row = 0;
    for (const PendingAction* a : outgoing[s.state_id]) {
      ElementRef e;
      e.element_id = "e:" + a->node.action_id;
      e.descriptor = "button " + b.topic.at(a->to);
      e.bbox = Rect{0, 40.0 * row, 200, 40.0 * row + 30};
      e.feature = descriptor_feature({e.descriptor}, cfg.feature_dim, feature_seed);
      descs.push_back(e.descriptor);
      s.elements.push_back(std::move(e));
      ++row;
    }
    for (int j = 0; j < cfg.distractors; ++j) {
      ElementRef e;
      e.element_id = "e:" + s.state_id + ":d" + std::to_string(j);
      e.descriptor = "banner " + t + " " + std::to_string(j);
      e.bbox = Rect{220, 40.0 * j, 320, 40.0 * j + 30};
      e.feature = descriptor_feature({e.descriptor}, cfg.feature_dim, feature_seed);
      descs.push_back(e.descriptor);
      s.elements.push_back(std::move(e));
    }
    s.feature = descriptor_feature(descs, cfg.feature_dim, feature_seed);
    g->add_state(s);
  }
  for (auto a : b.actions) {
    a.node.source_element = "e:" + a.node.action_id;
    g->add_action(a.node, a.from, a.to);
  }
  if (const auto problems = validate(*g); !problems.empty()) {
    throw Error(ErrorCode::invalid_argument, "generated graph is invalid: " + problems.front());
  }

  SynthEnv env;
  env.config = cfg;
  env.truth = g;
  env.root = root;
  env.horizon = cfg.depth * (1 + cfg.forced_steps);
  auto made = make_tasks(env, cfg.goal_count, derive_seed(cfg.seed, 1));
  if (made.warning) throw Error(ErrorCode::invalid_argument, *made.warning);
  env.tasks = std::move(made.tasks);
  return env;
}

TaskList make_tasks(const SynthEnv& env, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "task count must be >= 1");
  auto leaves = env.leaves();
  std::mt19937_64 rng(seed);
  std::shuffle(leaves.begin(), leaves.end(), rng);
  TaskList out;
  if (static_cast<std::size_t>(n) > leaves.size()) {
    out.warning = "requested " + std::to_string(n) + " tasks but only " + std::to_string(leaves.size()) +
                  " distinct terminal states exist";
  }
  const std::size_t count = std::min(leaves.size(), static_cast<std::size_t>(n));
  const auto& g = *env.truth;
  for (std::size_t i = 0; i < count; ++i) {
    Task t;
    t.id = "task-" + std::to_string(i);
    t.goals = {leaves[i]};
    const KgMdp m = make_mdp(env.truth, "", goal_set_reward(t.goals), env.horizon, env.root);
    t.optimal = greedy_path(uniform_q(m), m);
    if (path_reward(m, t.optimal) != 1.0) {
      throw Error(ErrorCode::invalid_argument, "goal " + leaves[i] + " is not reachable within the horizon");
    }
    std::vector<std::string> topics;
    for (std::size_t k = 1; k < t.optimal.states.size(); ++k) {
      const auto& page = g.state(t.optimal.states[k]).page_descriptor;
      const std::string topic = page.substr(page.find(' ') + 1);
      if (std::find(topics.begin(), topics.end(), topic) == topics.end()) topics.push_back(topic);
    }
    t.instruction = "reach " + join_tokens(topics);
    out.tasks.push_back(std::move(t));
  }
  return out;
}

KgMdp task_mdp(const SynthEnv& env, const Task& task, std::shared_ptr<const KnowledgeGraph> graph) {
  return make_mdp(graph ? std::move(graph) : env.truth, task.instruction, goal_set_reward(task.goals), env.horizon,
                  env.root);
}

std::optional<Path> reference_path(const KgMdp& m, const Task& task) {
  try {
    check_path(m, task.optimal);
    if (path_reward(m, task.optimal) == 1.0) return task.optimal;
  } catch (const Error&) {
    // not a path of this graph
  }
  const auto best = brute_force_optimal(m);
  if (best.successes.empty()) return std::nullopt;
  return *std::min_element(best.successes.begin(), best.successes.end(),
                           [](const Path& a, const Path& b) { return a.actions.size() < b.actions.size(); });
}

std::string to_string(ExplorationOutcome o) {
  switch (o) {
    case ExplorationOutcome::CONTINUE: return "CONTINUE";
    case ExplorationOutcome::BACKTRACK: return "BACKTRACK";
    case ExplorationOutcome::COMPLETE: return "COMPLETE";
  }
  return "?";
}

StateObservation observe(const KnowledgeGraph& g, const std::string& state_id) {
  const auto& s = g.state(state_id);
  return StateObservation{s.state_id, s.page_descriptor, s.feature, s.elements};
}

ActionRecord record_action(const KnowledgeGraph& g, const std::string& action_id) {
  const auto& a = g.action(action_id);
  return ActionRecord{a.action_id, a.source_element.value_or(""), a.atomic_action, a.functional_descriptor};
}

ExplorationResult dfs_explore(const SynthEnv& env, const Task& task, const ExploreConfig& cfg) {
  if (cfg.k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  if (cfg.max_depth < 0) throw Error(ErrorCode::invalid_argument, "max_depth must be >= 1");
  if (cfg.budget < 1) throw Error(ErrorCode::invalid_argument, "exploration budget must be >= 1");
  if (!(cfg.p_flip >= 0.0 && cfg.p_flip <= 1.0)) throw Error(ErrorCode::invalid_argument, "p_flip must be in [0,1]");
  const auto& g = *env.truth;
  const int max_depth = cfg.max_depth == 0 ? env.horizon : cfg.max_depth;
  constexpr int kInf = std::numeric_limits<int>::max() / 2;

  std::map<std::string, int> dist;
  std::function<int(const std::string&)> distance = [&](const std::string& s) -> int {
    if (auto it = dist.find(s); it != dist.end()) return it->second;
    int d = kInf;
    if (task.goals.contains(s)) {
      d = 0;
    } else {
      for (const auto& a : g.available_actions(s)) d = std::min(d, 1 + distance(g.target_of(a)));
    }
    dist[s] = d;
    return d;
  };

  ExplorationResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::string> states{env.root};
  std::vector<std::string> actions;
  bool done = false;

  auto emit = [&](ExplorationOutcome outcome) {
    Trajectory t;
    for (const auto& s : states) t.states.push_back(observe(g, s));
    for (const auto& a : actions) t.actions.push_back(record_action(g, a));
    t.provenance = "explore:" + task.id + ":" + std::to_string(result.trajectories.size());
    result.trajectories.push_back(std::move(t));
    result.outcomes.push_back(outcome);
  };

  std::function<void(int)> visit = [&](int depth) {
    const std::string s = states.back();
    auto candidates = g.available_actions(s);
    std::stable_sort(candidates.begin(), candidates.end(), [&](const std::string& a, const std::string& b) {
      return distance(g.target_of(a)) < distance(g.target_of(b));
    });
    for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
      if (cfg.p_flip > 0.0 && uniform01(rng) < cfg.p_flip) std::swap(candidates[i], candidates[i + 1]);
    }
    if (candidates.size() > static_cast<std::size_t>(cfg.k)) candidates.resize(static_cast<std::size_t>(cfg.k));
    for (const auto& a : candidates) {
      if (done || result.steps >= cfg.budget) return;
      result.steps += 1;
      const std::string next = g.target_of(a);
      actions.push_back(a);
      states.push_back(next);
      const int remaining = max_depth - (depth + 1);
      if (task.goals.contains(next)) {
        emit(ExplorationOutcome::COMPLETE);
        done = true;
      } else if (distance(next) > remaining) {
        emit(ExplorationOutcome::BACKTRACK);
      } else {
        visit(depth + 1);
      }
      actions.pop_back();
      states.pop_back();
    }
  };

  if (!task.goals.contains(env.root)) visit(0);
  return result;
}

KgMdp random_mdp(const RandomMdpConfig& cfg) {
  if (cfg.max_branching < 1 || cfg.horizon < 1) {
    throw Error(ErrorCode::invalid_argument, "random_mdp needs max_branching >= 1 and horizon >= 1");
  }
  std::mt19937_64 rng(cfg.seed);
  LayeredBuilder b{rng, {}, {}, {}, {}, 0, 0};
  const std::string root = b.new_state("");
  b.layers.push_back({root});
  for (int d = 0; d < cfg.horizon; ++d) {
    if (b.layers.size() <= static_cast<std::size_t>(d)) break;
    const auto parents = b.layers[static_cast<std::size_t>(d)];
    for (const auto& p : parents) {
      if (d > 0 && uniform01(rng) < cfg.early_terminal_prob) continue;
      const int k = std::uniform_int_distribution<int>(1, cfg.max_branching)(rng);
      for (const auto& child : b.children(k, cfg.dag_merge_prob, static_cast<std::size_t>(d + 1))) {
        b.new_action(p, child, "go " + child);
      }
    }
  }
  auto g = std::make_shared<KnowledgeGraph>(1);
  for (auto& s : b.states) {
    s.feature = {1.0};
    s.page_descriptor = "page " + s.state_id;
    g->add_state(s);
  }
  for (const auto& a : b.actions) g->add_action(a.node, a.from, a.to);
  std::set<std::string> goals;
  for (const auto& [id, s] : g->states()) {
    if (s.is_terminal && id != root && uniform01(rng) < cfg.goal_prob) goals.insert(id);
  }
  return make_mdp(g, "random", goal_set_reward(std::move(goals)), cfg.horizon, root);
}

}  // namespace eam
