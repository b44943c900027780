#include "eam/groups.hpp"

#include <algorithm>
#include <functional>

namespace eam {

PathCorpus PathCorpus::from_paths(std::vector<std::vector<std::string>> paths) {
  PathCorpus c;
  c.paths = std::move(paths);
  for (const auto& p : c.paths) c.vocabulary.insert(p.begin(), p.end());
  return c;
}

std::size_t PathCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& p : paths) n += p.size();
  return n;
}

std::map<ActionPair, std::size_t> count_adjacent_pairs(const PathCorpus& c) {
  std::map<ActionPair, std::size_t> counts;
  for (const auto& p : c.paths) {
    for (std::size_t i = 0; i + 1 < p.size(); ++i) ++counts[{p[i], p[i + 1]}];
  }
  return counts;
}

std::pair<ActionPair, std::size_t> most_frequent_pair(const PathCorpus& c) {
  const auto counts = count_adjacent_pairs(c);
  if (counts.empty()) throw Error(ErrorCode::invalid_argument, "corpus has no adjacent pair");
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;  // map order keeps the lexicographic winner on ties
  }
  return *best;
}

PathCorpus apply_merge(const PathCorpus& c, const MergeRule& rule) {
  if (!c.vocabulary.contains(rule.left) || !c.vocabulary.contains(rule.right)) {
    throw Error(ErrorCode::not_found, "merge rule references ids outside the vocabulary");
  }
  PathCorpus out;
  out.vocabulary = c.vocabulary;
  out.vocabulary.insert(rule.new_id);
  out.paths.reserve(c.paths.size());
  for (const auto& p : c.paths) {
    std::vector<std::string> merged;
    merged.reserve(p.size());
    for (std::size_t i = 0; i < p.size();) {
      if (i + 1 < p.size() && p[i] == rule.left && p[i + 1] == rule.right) {
        merged.push_back(rule.new_id);
        i += 2;
      } else {
        merged.push_back(p[i]);
        ++i;
      }
    }
    out.paths.push_back(std::move(merged));
  }
  return out;
}

std::string group_id(const std::string& left_chain, const std::string& right_chain) {
  return "grp:" + hex64(fnv1a64("(" + left_chain + " " + right_chain + ")"));
}

std::vector<MergeRule> mine_groups(const PathCorpus& c, std::size_t delta_f) {
  if (delta_f < 1) throw Error(ErrorCode::invalid_argument, "delta_f must be >= 1");
  std::vector<MergeRule> rules;
  std::map<std::string, std::string> chain;  // id -> bracketed constituent chain
  auto chain_of = [&](const std::string& id) {
    auto it = chain.find(id);
    return it == chain.end() ? id : it->second;
  };
  PathCorpus current = c;
  for (int j = 1;; ++j) {
    const auto counts = count_adjacent_pairs(current);
    if (counts.empty()) break;
    const auto [pair, freq] = most_frequent_pair(current);
    if (freq < delta_f) break;
    MergeRule rule{pair.first, pair.second, group_id(chain_of(pair.first), chain_of(pair.second)), freq, j};
    chain[rule.new_id] = "(" + chain_of(pair.first) + " " + chain_of(pair.second) + ")";
    current = apply_merge(current, rule);
    rules.push_back(std::move(rule));
  }
  return rules;
}

PathCorpus expand_corpus(const PathCorpus& c, const std::vector<MergeRule>& rules) {
  std::map<std::string, const MergeRule*> by_id;
  for (const auto& r : rules) by_id[r.new_id] = &r;
  std::function<void(const std::string&, std::vector<std::string>&)> expand =
      [&](const std::string& id, std::vector<std::string>& out) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
          out.push_back(id);
          return;
        }
        expand(it->second->left, out);
        expand(it->second->right, out);
      };
  std::vector<std::vector<std::string>> paths;
  for (const auto& p : c.paths) {
    std::vector<std::string> flat;
    for (const auto& id : p) expand(id, flat);
    paths.push_back(std::move(flat));
  }
  return PathCorpus::from_paths(std::move(paths));
}

PathCorpus path_corpus(const KnowledgeGraph& g, std::size_t max_paths) {
  std::vector<std::vector<std::string>> paths;
  std::vector<std::string> current;
  std::function<void(const std::string&)> walk = [&](const std::string& s) {
    if (paths.size() >= max_paths) return;
    bool any = false;
    for (const auto& a : g.available_actions(s)) {
      if (g.action(a).kind != ActionKind::atomic) continue;
      any = true;
      current.push_back(a);
      walk(g.target_of(a));
      current.pop_back();
      if (paths.size() >= max_paths) return;
    }
    if (!any && !current.empty()) paths.push_back(current);
  };
  for (const auto& r : g.roots()) walk(r);
  return PathCorpus::from_paths(std::move(paths));
}

namespace {

std::vector<ElementStep> steps_of(const ActionNode& a) {
  if (a.kind == ActionKind::group) return a.element_sequence;
  return {ElementStep{a.source_element.value_or(""), a.atomic_action, 0}};
}

}  // namespace

InstallReport install_groups(KnowledgeGraph& g, const std::vector<MergeRule>& rules) {
  InstallReport report;
  for (const auto& rule : rules) {
    if (!g.has_action(rule.left)) throw Error(ErrorCode::not_found, "rule references absent action " + rule.left);
    if (!g.has_action(rule.right)) throw Error(ErrorCode::not_found, "rule references absent action " + rule.right);
    if (g.has_action(rule.new_id) || g.has_state(rule.new_id)) {
      throw Error(ErrorCode::invalid_argument, "group id already present: " + rule.new_id);
    }
    const std::string& from = g.source_of(rule.left);
    const std::string& mid = g.target_of(rule.left);
    if (mid != g.source_of(rule.right)) {
      throw Error(ErrorCode::invalid_argument,
                  "non-composable rule " + rule.left + " . " + rule.right + ": " + mid + " != " + g.source_of(rule.right));
    }
    const std::string& to = g.target_of(rule.right);
    if (g.reaches(to, from)) {
      report.skipped.push_back(rule.new_id);
      continue;
    }
    const auto& left = g.action(rule.left);
    const auto& right = g.action(rule.right);
    ActionNode group;
    group.action_id = rule.new_id;
    group.kind = ActionKind::group;
    group.functional_descriptor = left.functional_descriptor + " then " + right.functional_descriptor;
    group.source_element = left.kind == ActionKind::group ? left.element_sequence.front().element_id
                                                          : left.source_element.value_or("");
    group.atomic_action.clear();
    group.element_sequence = steps_of(left);
    for (auto& s : steps_of(right)) group.element_sequence.push_back(std::move(s));
    for (std::size_t i = 0; i < group.element_sequence.size(); ++i) {
      group.element_sequence[i].order = static_cast<int>(i);
    }
    const std::string from_copy = from, to_copy = to;
    g.add_action(std::move(group), from_copy, to_copy);
    report.installed.push_back(rule.new_id);
  }
  return report;
}

std::vector<std::string> compact_groups(KnowledgeGraph& g) {
  std::vector<std::string> removed;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [id, a] : g.actions()) {
      const std::string& mid = g.target_of(id);
      const auto next = g.available_actions(mid);
      if (next.size() != 1) continue;
      const std::string& end = g.target_of(next.front());
      bool covered = false;
      for (const auto& other : g.available_actions(g.source_of(id))) {
        if (other != id && g.action(other).kind == ActionKind::group && g.target_of(other) == end) covered = true;
      }
      if (!covered) continue;
      removed.push_back(id);
      g.remove_action(id);
      changed = true;
      break;
    }
  }
  return removed;
}

}  // namespace eam
