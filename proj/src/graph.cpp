#include "eam/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace eam {

namespace {

const std::set<std::string> kNoIds;

std::string fresh_id(const KnowledgeGraph& g, const std::string& wanted) {
  auto taken = [&](const std::string& id) { return g.has_state(id) || g.has_action(id); };
  if (!wanted.empty() && !taken(wanted)) return wanted;
  const std::string base = wanted.empty() ? "node" : wanted;
  for (int n = 2;; ++n) {
    std::string id = base + "#" + std::to_string(n);
    if (!taken(id)) return id;
  }
}

// Appends `extra` to `text` unless it is already one of its " | " parts.
void concat_descriptor(std::string& text, const std::string& extra, const std::string& sep) {
  if (extra.empty() || text == extra) return;
  if (text.empty()) {
    text = extra;
    return;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(sep, pos);
    if (end == std::string::npos) end = text.size();
    if (text.compare(pos, end - pos, extra) == 0 && end - pos == extra.size()) return;
    pos = end + sep.size();
  }
  text += sep;
  text += extra;
}

}  // namespace

void check_rect(const Rect& r) {
  for (double v : {r.x_min, r.y_min, r.x_max, r.y_max}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "rectangle has non-finite coordinate");
  }
  if (r.x_min > r.x_max || r.y_min > r.y_max) {
    throw Error(ErrorCode::invalid_argument, "malformed rectangle: min exceeds max");
  }
}

double iou(const Rect& a, const Rect& b) {
  check_rect(a);
  check_rect(b);
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "feature dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------

KnowledgeGraph::KnowledgeGraph(int feature_dim) : feature_dim_(feature_dim) {
  if (feature_dim < 1) throw Error(ErrorCode::invalid_argument, "feature_dim must be >= 1");
}

KnowledgeGraph new_graph(int feature_dim) { return KnowledgeGraph(feature_dim); }

void KnowledgeGraph::check_feature(const std::vector<double>& f, const std::string& who) const {
  if (static_cast<int>(f.size()) != feature_dim_) {
    throw Error(ErrorCode::invalid_argument,
                "feature dimension mismatch for " + who + ": got " + std::to_string(f.size()) +
                    ", graph uses " + std::to_string(feature_dim_));
  }
}

const StateNode& KnowledgeGraph::state(const std::string& id) const {
  auto it = states_.find(id);
  if (it == states_.end()) throw Error(ErrorCode::not_found, "unknown state_id " + id);
  return it->second;
}

StateNode& KnowledgeGraph::mutable_state(const std::string& id) {
  auto it = states_.find(id);
  if (it == states_.end()) throw Error(ErrorCode::not_found, "unknown state_id " + id);
  return it->second;
}

const ActionNode& KnowledgeGraph::action(const std::string& id) const {
  auto it = actions_.find(id);
  if (it == actions_.end()) throw Error(ErrorCode::not_found, "unknown action_id " + id);
  return it->second;
}

void KnowledgeGraph::add_state(StateNode s) {
  if (s.state_id.empty()) throw Error(ErrorCode::invalid_argument, "empty state_id");
  if (has_state(s.state_id) || has_action(s.state_id)) {
    throw Error(ErrorCode::invalid_argument, "duplicate id " + s.state_id);
  }
  check_feature(s.feature, "state " + s.state_id);
  for (const auto& e : s.elements) {
    check_rect(e.bbox);
    check_feature(e.feature, "element " + e.element_id);
  }
  s.is_terminal = true;
  const std::string id = s.state_id;
  states_.emplace(id, std::move(s));
}

void KnowledgeGraph::add_action(ActionNode a, const std::string& from, const std::string& to) {
  if (a.action_id.empty()) throw Error(ErrorCode::invalid_argument, "empty action_id");
  if (has_state(a.action_id) || has_action(a.action_id)) {
    throw Error(ErrorCode::invalid_argument, "duplicate id " + a.action_id);
  }
  if (!has_state(from)) throw Error(ErrorCode::not_found, "unknown state_id " + from);
  if (!has_state(to)) throw Error(ErrorCode::not_found, "unknown state_id " + to);
  if (a.kind == ActionKind::group && a.element_sequence.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "group action needs >= 2 steps: " + a.action_id);
  }
  if (a.kind == ActionKind::atomic && !a.element_sequence.empty()) {
    throw Error(ErrorCode::invalid_argument, "atomic action carries an element sequence: " + a.action_id);
  }
  const std::string id = a.action_id;
  actions_.emplace(id, std::move(a));
  add_edge(from, id);
  add_edge(id, to);
}

void KnowledgeGraph::add_edge(const std::string& from, const std::string& to) {
  const bool from_known = has_state(from) || has_action(from);
  const bool to_known = has_state(to) || has_action(to);
  if (!from_known) throw Error(ErrorCode::not_found, "unknown edge endpoint " + from);
  if (!to_known) throw Error(ErrorCode::not_found, "unknown edge endpoint " + to);
  edges_.insert(Edge{from, to});
  out_[from].insert(to);
  in_[to].insert(from);
  if (auto it = states_.find(from); it != states_.end()) it->second.is_terminal = false;
}

void KnowledgeGraph::remove_action(const std::string& id) {
  if (!has_action(id)) throw Error(ErrorCode::not_found, "unknown action_id " + id);
  for (const auto& p : std::set<std::string>(predecessors(id))) {
    edges_.erase(Edge{p, id});
    out_[p].erase(id);
    if (auto it = states_.find(p); it != states_.end()) it->second.is_terminal = out_[p].empty();
  }
  for (const auto& s : std::set<std::string>(successors(id))) {
    edges_.erase(Edge{id, s});
    in_[s].erase(id);
  }
  out_.erase(id);
  in_.erase(id);
  actions_.erase(id);
}

const std::set<std::string>& KnowledgeGraph::successors(const std::string& id) const {
  auto it = out_.find(id);
  return it == out_.end() ? kNoIds : it->second;
}

const std::set<std::string>& KnowledgeGraph::predecessors(const std::string& id) const {
  auto it = in_.find(id);
  return it == in_.end() ? kNoIds : it->second;
}

std::vector<std::string> KnowledgeGraph::available_actions(const std::string& state_id) const {
  if (!has_state(state_id)) throw Error(ErrorCode::not_found, "unknown state_id " + state_id);
  std::vector<std::string> out;
  for (const auto& id : successors(state_id)) {
    if (has_action(id)) out.push_back(id);
  }
  return out;  // std::set iteration is already lexicographic
}

bool KnowledgeGraph::is_terminal(const std::string& state_id) const {
  return available_actions(state_id).empty();
}

const std::string& KnowledgeGraph::source_of(const std::string& action_id) const {
  const auto& p = predecessors(action_id);
  if (!has_action(action_id) || p.empty()) {
    throw Error(ErrorCode::not_found, "action without source: " + action_id);
  }
  return *p.begin();
}

const std::string& KnowledgeGraph::target_of(const std::string& action_id) const {
  const auto& s = successors(action_id);
  if (!has_action(action_id) || s.empty()) {
    throw Error(ErrorCode::not_found, "action without successor: " + action_id);
  }
  return *s.begin();
}

std::vector<std::string> KnowledgeGraph::roots() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : states_) {
    if (predecessors(id).empty()) out.push_back(id);
  }
  return out;
}

bool KnowledgeGraph::reaches(const std::string& from, const std::string& to) const {
  if (from == to) return true;
  std::set<std::string> seen{from};
  std::vector<std::string> stack{from};
  while (!stack.empty()) {
    const std::string s = stack.back();
    stack.pop_back();
    for (const auto& a : successors(s)) {
      for (const auto& next : successors(a)) {
        if (next == to) return true;
        if (seen.insert(next).second) stack.push_back(next);
      }
    }
  }
  return false;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
  return feature_dim_ == other.feature_dim_ && schema_version_ == other.schema_version_ &&
         states_ == other.states_ && actions_ == other.actions_ && edges_ == other.edges_;
}

// ---------------------------------------------------------------------------

std::optional<std::vector<std::string>> topological_states(const KnowledgeGraph& g) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> next;
  for (const auto& [id, _] : g.states()) indegree[id] = 0;
  for (const auto& [aid, _] : g.actions()) {
    for (const auto& from : g.predecessors(aid)) {
      if (!g.has_state(from)) continue;
      for (const auto& to : g.successors(aid)) {
        if (!g.has_state(to)) continue;
        next[from].push_back(to);
        ++indegree[to];
      }
    }
  }
  std::vector<std::string> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  std::vector<std::string> order;
  // Pop smallest id first for a deterministic order.
  std::sort(ready.begin(), ready.end(), std::greater<>());
  while (!ready.empty()) {
    std::string s = ready.back();
    ready.pop_back();
    order.push_back(s);
    for (const auto& t : next[s]) {
      if (--indegree[t] == 0) {
        ready.push_back(t);
        std::sort(ready.begin(), ready.end(), std::greater<>());
      }
    }
  }
  if (order.size() != g.states().size()) return std::nullopt;
  return order;
}

std::vector<std::string> validate(const KnowledgeGraph& g) {
  std::vector<std::string> v;
  for (const auto& e : g.edges()) {
    const bool s_to_a = g.has_state(e.from) && g.has_action(e.to);
    const bool a_to_s = g.has_action(e.from) && g.has_state(e.to);
    if (!s_to_a && !a_to_s) v.push_back("edge " + e.from + " -> " + e.to + " does not alternate state/action");
  }
  for (const auto& [id, s] : g.states()) {
    if (static_cast<int>(s.feature.size()) != g.feature_dim()) {
      v.push_back("state " + id + " feature length differs from feature_dim");
    }
    for (const auto& el : s.elements) {
      if (static_cast<int>(el.feature.size()) != g.feature_dim()) {
        v.push_back("element " + el.element_id + " of state " + id + " feature length differs from feature_dim");
      }
      if (el.bbox.x_min > el.bbox.x_max || el.bbox.y_min > el.bbox.y_max) {
        v.push_back("element " + el.element_id + " of state " + id + " has malformed bbox");
      }
    }
    const bool terminal = g.available_actions(id).empty();
    if (s.is_terminal != terminal) v.push_back("state " + id + " is_terminal flag disagrees with edges");
  }
  for (const auto& [id, a] : g.actions()) {
    int in_states = 0, out_states = 0;
    for (const auto& p : g.predecessors(id)) in_states += g.has_state(p) ? 1 : 0;
    for (const auto& s : g.successors(id)) out_states += g.has_state(s) ? 1 : 0;
    if (in_states != 1) v.push_back("action " + id + " has " + std::to_string(in_states) + " source states");
    if (out_states != 1) v.push_back("action " + id + " has " + std::to_string(out_states) + " successor states");
    if (a.kind == ActionKind::group && a.element_sequence.size() < 2) {
      v.push_back("group action " + id + " has fewer than 2 element steps");
    }
    if (a.kind == ActionKind::atomic && !a.element_sequence.empty()) {
      v.push_back("atomic action " + id + " carries an element sequence");
    }
  }
  if (!topological_states(g)) {
    // Name one cycle for the report.
    std::map<std::string, int> color;
    std::vector<std::string> stack;
    std::string cycle;
    std::function<bool(const std::string&)> dfs = [&](const std::string& s) {
      color[s] = 1;
      stack.push_back(s);
      for (const auto& a : g.successors(s)) {
        for (const auto& t : g.successors(a)) {
          if (!g.has_state(t)) continue;
          if (color[t] == 1) {
            auto it = std::find(stack.begin(), stack.end(), t);
            for (; it != stack.end(); ++it) cycle += *it + " -> ";
            cycle += t;
            return true;
          }
          if (color[t] == 0 && dfs(t)) return true;
        }
      }
      stack.pop_back();
      color[s] = 2;
      return false;
    };
    for (const auto& [id, _] : g.states()) {
      if (color[id] == 0 && dfs(id)) break;
    }
    v.push_back("state cycle: " + cycle);
  }
  return v;
}

// ---------------------------------------------------------------------------

void check_trajectory(const Trajectory& t, int feature_dim) {
  if (t.states.empty()) throw Error(ErrorCode::invalid_argument, "trajectory has no states");
  if (t.states.size() != t.actions.size() + 1) {
    throw Error(ErrorCode::invalid_argument, "trajectory must alternate and begin/end with a state");
  }
  for (const auto& s : t.states) {
    if (static_cast<int>(s.feature.size()) != feature_dim) {
      throw Error(ErrorCode::invalid_argument, "feature dimension mismatch in observation " + s.observation_id);
    }
    for (const auto& e : s.elements) {
      check_rect(e.bbox);
      if (static_cast<int>(e.feature.size()) != feature_dim) {
        throw Error(ErrorCode::invalid_argument, "feature dimension mismatch in element " + e.element_id);
      }
    }
  }
}

ExtractedDescriptors TemplateDescriptorProvider::extract(const StateObservation& from,
                                                         const ActionRecord& action,
                                                         const StateObservation& to) {
  auto element_text = [&](const std::string& id) -> std::string {
    for (const auto& e : from.elements) {
      if (e.element_id == id) return e.descriptor;
    }
    return id;
  };
  ExtractedDescriptors out;
  out.source_page = from.page_descriptor;
  out.target_page = to.page_descriptor;
  out.action_function = action.descriptor.empty()
                            ? action.atomic_action + " " + element_text(action.source_element) + " to reach " +
                                  to.page_descriptor
                            : action.descriptor;
  return out;
}

std::string transition_key(const StateObservation& from, const ActionRecord& action,
                           const StateObservation& to) {
  return from.observation_id + "|" + action.action_id + "|" + to.observation_id;
}

ExtractedDescriptors RecordingDescriptorProvider::extract(const StateObservation& from,
                                                          const ActionRecord& action,
                                                          const StateObservation& to) {
  auto out = inner_.extract(from, action, to);
  records_[transition_key(from, action, to)] = out;
  return out;
}

ExtractedDescriptors ReplayDescriptorProvider::extract(const StateObservation& from,
                                                       const ActionRecord& action,
                                                       const StateObservation& to) {
  auto it = records_.find(transition_key(from, action, to));
  if (it == records_.end()) {
    throw Error(ErrorCode::not_found, "no recorded descriptors for " + transition_key(from, action, to));
  }
  return it->second;
}

// ---------------------------------------------------------------------------

std::optional<std::string> dedup_state(const KnowledgeGraph& g, const StateNode& s,
                                       const DedupConfig& cfg) {
  if (static_cast<int>(s.feature.size()) != g.feature_dim()) {
    throw Error(ErrorCode::invalid_argument, "feature dimension mismatch in dedup_state");
  }
  std::optional<std::string> best;
  double best_cos = -2.0;
  // states() is ordered by id, so a strict > keeps the smallest id on ties.
  for (const auto& [id, candidate] : g.states()) {
    const double cos = cosine_similarity(s.feature, candidate.feature);
    if (cos < cfg.tau_coarse) continue;
    if (cos <= best_cos) continue;
    if (!cfg.fine_comparator(candidate, s)) continue;
    best = id;
    best_cos = cos;
  }
  return best;
}

namespace {

StateNode node_from(const StateObservation& o) {
  StateNode n;
  n.state_id = o.observation_id;
  n.page_descriptor = o.page_descriptor;
  n.feature = o.feature;
  n.elements = o.elements;
  return n;
}

// Unifies incoming elements into an existing state; returns incoming-id -> graph-id.
std::map<std::string, std::string> unify_elements(StateNode& target, const std::vector<ElementRef>& incoming,
                                                  double tau_iou, int& merged) {
  std::map<std::string, std::string> remap;
  for (const auto& e : incoming) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t i = 0; i < target.elements.size(); ++i) {
      const double v = iou(target.elements[i].bbox, e.bbox);
      if (v >= tau_iou && v > best_iou) {
        best = static_cast<int>(i);
        best_iou = v;
      }
    }
    if (best >= 0) {
      auto& kept = target.elements[static_cast<std::size_t>(best)];
      concat_descriptor(kept.descriptor, e.descriptor, " + ");
      remap[e.element_id] = kept.element_id;
      ++merged;
      continue;
    }
    ElementRef added = e;
    auto taken = [&](const std::string& id) {
      return std::any_of(target.elements.begin(), target.elements.end(),
                         [&](const ElementRef& x) { return x.element_id == id; });
    };
    for (int n = 2; taken(added.element_id); ++n) added.element_id = e.element_id + "#" + std::to_string(n);
    remap[e.element_id] = added.element_id;
    target.elements.push_back(std::move(added));
  }
  return remap;
}

void merge_page_descriptor(StateNode& node, const std::string& text, const std::string& provenance) {
  if (text.empty() || node.page_descriptor == text) return;
  if (node.page_descriptor.empty()) {
    node.page_descriptor = text;
    return;
  }
  const std::string tagged = provenance.empty() ? text : "[" + provenance + "] " + text;
  concat_descriptor(node.page_descriptor, tagged, " | ");
}

}  // namespace

MergeReport merge_trajectory(KnowledgeGraph& g, const Trajectory& t, const DedupConfig& cfg,
                             DescriptorProvider& descriptors) {
  if (cfg.tau_iou < 0.0 || cfg.tau_iou > 1.0) throw Error(ErrorCode::invalid_argument, "tau_iou outside [0,1]");
  check_trajectory(t, g.feature_dim());
  MergeReport report;

  std::vector<ExtractedDescriptors> extracted;
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    extracted.push_back(descriptors.extract(t.states[i], t.actions[i], t.states[i + 1]));
  }
  auto page_text = [&](std::size_t i) {
    if (i < extracted.size()) return extracted[i].source_page;
    if (i > 0) return extracted[i - 1].target_page;
    return t.states[i].page_descriptor;
  };

  std::vector<std::map<std::string, std::string>> element_maps;
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    StateNode candidate = node_from(t.states[i]);
    candidate.page_descriptor = page_text(i);
    std::map<std::string, std::string> remap;
    if (auto match = dedup_state(g, candidate, cfg)) {
      StateNode& node = g.mutable_state(*match);
      remap = unify_elements(node, t.states[i].elements, cfg.tau_iou, report.merged_elements);
      merge_page_descriptor(node, candidate.page_descriptor, t.provenance);
      report.state_mapping.push_back(*match);
      ++report.merged_states;
    } else {
      candidate.state_id = fresh_id(g, candidate.state_id);
      for (const auto& e : candidate.elements) remap[e.element_id] = e.element_id;
      report.state_mapping.push_back(candidate.state_id);
      g.add_state(std::move(candidate));
      ++report.new_states;
    }
    element_maps.push_back(std::move(remap));
  }

  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    const auto& rec = t.actions[i];
    const std::string& from = report.state_mapping[i];
    const std::string& to = report.state_mapping[i + 1];
    if (g.reaches(to, from)) {
      report.dropped_edges.push_back(Edge{from, to});
      continue;
    }
    std::string element = rec.source_element;
    if (auto it = element_maps[i].find(element); it != element_maps[i].end()) element = it->second;

    bool merged = false;
    for (const auto& aid : g.available_actions(from)) {
      const auto& existing = g.action(aid);
      if (existing.kind != ActionKind::atomic) continue;
      if (existing.source_element.value_or("") == element && g.target_of(aid) == to) {
        merged = true;
        break;
      }
    }
    if (merged) continue;

    ActionNode a;
    a.kind = ActionKind::atomic;
    a.functional_descriptor = extracted[i].action_function;
    if (!element.empty()) a.source_element = element;
    a.atomic_action = rec.atomic_action;
    const std::string wanted = rec.action_id.empty() ? "a:" + hex64(fnv1a64(from + "|" + element + "|" + to)) : rec.action_id;
    a.action_id = fresh_id(g, wanted);
    g.add_action(std::move(a), from, to);
    ++report.new_actions;
  }
  return report;
}

std::vector<double> descriptor_feature(const std::vector<std::string>& descriptors, int dim,
                                       std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "feature dim must be >= 1");
  std::vector<double> f(static_cast<std::size_t>(dim), 0.0);
  for (const auto& d : descriptors) {
    const std::uint64_t h = fnv1a64(d, seed);
    const std::size_t bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    f[bucket] += ((h >> 63) != 0U) ? -1.0 : 1.0;
  }
  double norm = 0;
  for (double v : f) norm += v * v;
  if (norm > 0) {
    norm = std::sqrt(norm);
    for (double& v : f) v /= norm;
  }
  return f;
}

}  // namespace eam
