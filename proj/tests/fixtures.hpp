#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "eam/graph.hpp"
#include "eam/mdp.hpp"

namespace fixtures {

inline eam::StateNode state(const std::string& id, std::vector<double> feature = {1.0, 0.0}) {
  eam::StateNode s;
  s.state_id = id;
  s.page_descriptor = "page " + id;
  s.feature = std::move(feature);
  return s;
}

inline eam::ActionNode action(const std::string& id, const std::string& descriptor = "") {
  eam::ActionNode a;
  a.action_id = id;
  a.functional_descriptor = descriptor.empty() ? "do " + id : descriptor;
  a.source_element = "e:" + id;
  return a;
}

// s0 -> {a1 -> s1, a2 -> s2}; s1 -> {a3 -> s3 (goal), a4 -> s4}; s2 -> {a5 -> s4}.
inline eam::KnowledgeGraph g1_graph() {
  eam::KnowledgeGraph g(2);
  for (const char* id : {"s0", "s1", "s2", "s3", "s4"}) g.add_state(state(id));
  g.add_action(action("a1"), "s0", "s1");
  g.add_action(action("a2"), "s0", "s2");
  g.add_action(action("a3"), "s1", "s3");
  g.add_action(action("a4"), "s1", "s4");
  g.add_action(action("a5"), "s2", "s4");
  return g;
}

inline eam::KgMdp g1(int horizon = 2) {
  return eam::make_mdp(std::make_shared<const eam::KnowledgeGraph>(g1_graph()), "reach s3",
                       eam::goal_set_reward({"s3"}), horizon, "s0");
}

inline eam::Path g1_optimal() { return eam::Path{{"s0", "s1", "s3"}, {"a1", "a3"}}; }

// s0 -c0-> s1 -c1-> ... single-action chain of the given length.
inline eam::KnowledgeGraph chain_graph(int length) {
  eam::KnowledgeGraph g(2);
  for (int i = 0; i <= length; ++i) g.add_state(state("s" + std::to_string(i)));
  for (int i = 0; i < length; ++i) {
    g.add_action(action("c" + std::to_string(i)), "s" + std::to_string(i), "s" + std::to_string(i + 1));
  }
  return g;
}

inline eam::KgMdp chain(int length, bool goal = true) {
  std::set<std::string> goals;
  if (goal) goals.insert("s" + std::to_string(length));
  return eam::make_mdp(std::make_shared<const eam::KnowledgeGraph>(chain_graph(length)), "chain",
                       eam::goal_set_reward(goals), length, "s0");
}

}  // namespace fixtures
