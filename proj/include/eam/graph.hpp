#pragma once

// GUI-logic knowledge graph: alternating state/action DAG, trajectory
// ingestion with state and element deduplication.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "eam/common.hpp"

namespace eam {

struct Rect {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
  bool operator==(const Rect&) const = default;
};

/// Throws invalid_argument when coordinates are non-finite or min > max.
void check_rect(const Rect& r);

/// Intersection over union; 0 when the union has zero area.
double iou(const Rect& a, const Rect& b);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct ElementRef {
  std::string element_id;
  Rect bbox;
  std::vector<double> feature;
  std::string descriptor;

  bool operator==(const ElementRef&) const = default;
};

struct StateNode {
  std::string state_id;
  std::string page_descriptor;
  std::vector<double> feature;
  std::vector<ElementRef> elements;
  bool is_terminal = true;

  bool operator==(const StateNode&) const = default;
};

enum class ActionKind { atomic, group };

struct ElementStep {
  std::string element_id;
  std::string atomic_action;
  int order = 0;

  bool operator==(const ElementStep&) const = default;
};

struct ActionNode {
  std::string action_id;
  ActionKind kind = ActionKind::atomic;
  std::string functional_descriptor;
  std::optional<std::string> source_element;
  // Operation performed on source_element ("tap", "type", ...); atomic only.
  std::string atomic_action = "tap";
  std::vector<ElementStep> element_sequence;  // non-empty iff kind == group

  bool operator==(const ActionNode&) const = default;
};

struct Edge {
  std::string from;
  std::string to;

  auto operator<=>(const Edge&) const = default;
};

/// Bipartite directed graph G = (S, A, E). States and actions share one id
/// namespace so that edges are unambiguous. Single writer; share as
/// `std::shared_ptr<const KnowledgeGraph>` once construction is finished.
class KnowledgeGraph {
 public:
  explicit KnowledgeGraph(int feature_dim);

  int feature_dim() const noexcept { return feature_dim_; }
  int schema_version() const noexcept { return schema_version_; }

  const std::map<std::string, StateNode>& states() const noexcept { return states_; }
  const std::map<std::string, ActionNode>& actions() const noexcept { return actions_; }
  const std::set<Edge>& edges() const noexcept { return edges_; }

  bool has_state(const std::string& id) const { return states_.contains(id); }
  bool has_action(const std::string& id) const { return actions_.contains(id); }
  const StateNode& state(const std::string& id) const;
  const ActionNode& action(const std::string& id) const;
  StateNode& mutable_state(const std::string& id);

  void add_state(StateNode s);
  /// Adds an action with edges from -> action -> to. Both states must exist.
  void add_action(ActionNode a, const std::string& from, const std::string& to);
  /// Raw edge insertion; no invariant checks beyond endpoint existence.
  void add_edge(const std::string& from, const std::string& to);
  void remove_action(const std::string& id);

  /// A(s) in lexicographic order of action id.
  std::vector<std::string> available_actions(const std::string& state_id) const;
  bool is_terminal(const std::string& state_id) const;
  /// Source state of an action (first predecessor).
  const std::string& source_of(const std::string& action_id) const;
  /// Successor state of an action (first successor).
  const std::string& target_of(const std::string& action_id) const;

  const std::set<std::string>& successors(const std::string& id) const;
  const std::set<std::string>& predecessors(const std::string& id) const;

  /// States with no incoming edge, lexicographic.
  std::vector<std::string> roots() const;
  /// True when `to` is reachable from `from` over state->action->state edges.
  bool reaches(const std::string& from, const std::string& to) const;

  bool operator==(const KnowledgeGraph& other) const;

 private:
  int feature_dim_;
  int schema_version_ = kSchemaVersion;
  std::map<std::string, StateNode> states_;
  std::map<std::string, ActionNode> actions_;
  std::set<Edge> edges_;
  std::map<std::string, std::set<std::string>> out_;
  std::map<std::string, std::set<std::string>> in_;

  void check_feature(const std::vector<double>& f, const std::string& who) const;
};

KnowledgeGraph new_graph(int feature_dim);

/// Every invariant breach as a human-readable line naming the node/edge.
std::vector<std::string> validate(const KnowledgeGraph& g);

/// Kahn topological order of states; nullopt when the state graph is cyclic.
std::optional<std::vector<std::string>> topological_states(const KnowledgeGraph& g);

// ---------------------------------------------------------------------------
// Trajectories

struct StateObservation {
  std::string observation_id;
  std::string page_descriptor;
  std::vector<double> feature;
  std::vector<ElementRef> elements;

  bool operator==(const StateObservation&) const = default;
};

struct ActionRecord {
  std::string action_id;
  std::string source_element;
  std::string atomic_action = "tap";
  std::string descriptor;

  bool operator==(const ActionRecord&) const = default;
};

/// ⟨s0, a0, s1, ..., sn⟩ stored as n+1 states and n actions.
struct Trajectory {
  std::vector<StateObservation> states;
  std::vector<ActionRecord> actions;
  std::string provenance;

  bool operator==(const Trajectory&) const = default;
};

void check_trajectory(const Trajectory& t, int feature_dim);

// ---------------------------------------------------------------------------
// Descriptor providers (semantic enrichment of d_s and f_a)

struct ExtractedDescriptors {
  std::string source_page;
  std::string target_page;
  std::string action_function;

  bool operator==(const ExtractedDescriptors&) const = default;
};

class DescriptorProvider {
 public:
  virtual ~DescriptorProvider() = default;
  virtual ExtractedDescriptors extract(const StateObservation& from, const ActionRecord& action,
                                       const StateObservation& to) = 0;
};

/// Deterministic template text built from the raw observation fields.
class TemplateDescriptorProvider : public DescriptorProvider {
 public:
  ExtractedDescriptors extract(const StateObservation& from, const ActionRecord& action,
                               const StateObservation& to) override;
};

/// Key used by recording/replay providers: "from|action|to".
std::string transition_key(const StateObservation& from, const ActionRecord& action,
                           const StateObservation& to);

class RecordingDescriptorProvider : public DescriptorProvider {
 public:
  explicit RecordingDescriptorProvider(DescriptorProvider& inner) : inner_(inner) {}
  ExtractedDescriptors extract(const StateObservation& from, const ActionRecord& action,
                               const StateObservation& to) override;
  const std::map<std::string, ExtractedDescriptors>& records() const noexcept { return records_; }

 private:
  DescriptorProvider& inner_;
  std::map<std::string, ExtractedDescriptors> records_;
};

class ReplayDescriptorProvider : public DescriptorProvider {
 public:
  explicit ReplayDescriptorProvider(std::map<std::string, ExtractedDescriptors> records)
      : records_(std::move(records)) {}
  /// Throws not_found for transitions missing from the recording.
  ExtractedDescriptors extract(const StateObservation& from, const ActionRecord& action,
                               const StateObservation& to) override;

 private:
  std::map<std::string, ExtractedDescriptors> records_;
};

// ---------------------------------------------------------------------------
// Deduplication and merge

using StateComparator = std::function<bool(const StateNode& existing, const StateNode& incoming)>;

inline bool always_accept(const StateNode&, const StateNode&) { return true; }
inline bool always_reject(const StateNode&, const StateNode&) { return false; }
/// Accepts when ids agree; the simulator oracle for fine-grained comparison.
inline bool same_id(const StateNode& a, const StateNode& b) { return a.state_id == b.state_id; }

struct DedupConfig {
  // Defaults are unvalidated choices; the source method names no values.
  double tau_coarse = 0.95;
  StateComparator fine_comparator = always_accept;
  double tau_iou = 0.5;
};

/// Existing state matching `s` (cosine >= tau_coarse and comparator accepts);
/// highest cosine wins, ties go to the smallest id.
std::optional<std::string> dedup_state(const KnowledgeGraph& g, const StateNode& s,
                                       const DedupConfig& cfg);

struct MergeReport {
  int new_states = 0;
  int merged_states = 0;
  int new_actions = 0;
  int merged_elements = 0;
  std::vector<Edge> dropped_edges;  // cycle-closing transitions
  std::vector<std::string> state_mapping;  // trajectory position -> graph state id
};

MergeReport merge_trajectory(KnowledgeGraph& g, const Trajectory& t, const DedupConfig& cfg,
                             DescriptorProvider& descriptors);

/// Seeded feature hash of an element-descriptor multiset, L2-normalized.
std::vector<double> descriptor_feature(const std::vector<std::string>& descriptors, int dim,
                                       std::uint64_t seed);

}  // namespace eam
