#pragma once

// BPE-style mining of recurring adjacent action pairs into action groups.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "eam/graph.hpp"

namespace eam {

struct PathCorpus {
  std::vector<std::vector<std::string>> paths;
  std::set<std::string> vocabulary;

  static PathCorpus from_paths(std::vector<std::vector<std::string>> paths);
  std::size_t token_count() const;
  bool operator==(const PathCorpus&) const = default;
};

using ActionPair = std::pair<std::string, std::string>;

struct MergeRule {
  std::string left;
  std::string right;
  std::string new_id;
  std::size_t frequency = 0;
  int iteration = 0;

  bool operator==(const MergeRule&) const = default;
};

/// Every adjacent ordered pair, overlapping occurrences counted per position.
std::map<ActionPair, std::size_t> count_adjacent_pairs(const PathCorpus& c);

/// Arg-max pair; ties resolved by lexicographic (left, right).
std::pair<ActionPair, std::size_t> most_frequent_pair(const PathCorpus& c);

/// Left-to-right greedy non-overlapping replacement of rule.left, rule.right.
PathCorpus apply_merge(const PathCorpus& c, const MergeRule& rule);

/// "grp:" + stable hash of the bracketed constituent chain.
std::string group_id(const std::string& left_chain, const std::string& right_chain);

/// Merges while the most frequent pair occurs at least delta_f times.
std::vector<MergeRule> mine_groups(const PathCorpus& c, std::size_t delta_f);

/// Replaces every group id by its constituents, recursively.
PathCorpus expand_corpus(const PathCorpus& c, const std::vector<MergeRule>& rules);

/// Root-to-terminal atomic action sequences in deterministic DFS order, capped.
PathCorpus path_corpus(const KnowledgeGraph& g, std::size_t max_paths = 10000);

struct InstallReport {
  std::vector<std::string> installed;
  std::vector<std::string> skipped;  // rules whose installation would close a state cycle
};

/// Adds one group ActionNode per rule spanning source(left) -> target(right).
/// Throws not_found for absent constituents and invalid_argument when
/// target(left) != source(right).
InstallReport install_groups(KnowledgeGraph& g, const std::vector<MergeRule>& rules);

/// Removes actions a at s whose target has a single outgoing action b
/// when a group action at s already reaches target(b). Repeats to a fixpoint
/// and returns the removed ids in removal order.
std::vector<std::string> compact_groups(KnowledgeGraph& g);

}  // namespace eam
