#include "eam/io.hpp"

#include <fstream>
#include <sstream>

namespace eam {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, what + ": malformed document: " + e.what());
  }
}

void check_schema(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw Error(ErrorCode::schema_mismatch, what + ": missing schema_version");
  }
  const auto v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::schema_mismatch, what + ": schema_version " + v.dump() + " != " +
                                                std::to_string(kSchemaVersion));
  }
}

namespace {

// Wraps nlohmann type/lookup errors as invalid_argument.
template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, what + ": " + e.what());
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

json rect_to_json(const Rect& r) {
  return {{"x_min", r.x_min}, {"y_min", r.y_min}, {"x_max", r.x_max}, {"y_max", r.y_max}};
}
Rect rect_from_json(const json& j) {
  return Rect{j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
              j.at("y_max").get<double>()};
}

json element_to_json(const ElementRef& e) {
  return {{"element_id", e.element_id}, {"bbox", rect_to_json(e.bbox)}, {"feature", e.feature},
          {"descriptor", e.descriptor}};
}
ElementRef element_from_json(const json& j) {
  return ElementRef{j.at("element_id").get<std::string>(), rect_from_json(j.at("bbox")),
                    j.at("feature").get<std::vector<double>>(), j.at("descriptor").get<std::string>()};
}

std::vector<ElementRef> elements_from_json(const json& j) {
  std::vector<ElementRef> out;
  for (const auto& e : j) out.push_back(element_from_json(e));
  return out;
}

json elements_to_json(const std::vector<ElementRef>& es) {
  json out = json::array();
  for (const auto& e : es) out.push_back(element_to_json(e));
  return out;
}

json context_to_json(const QContext& c) {
  return {{"instruction", c.instruction}, {"state_id", c.state_id}, {"page_descriptor", c.page_descriptor},
          {"history", c.history}};
}
QContext context_from_json(const json& j) {
  return QContext{j.at("instruction").get<std::string>(), j.at("state_id").get<std::string>(),
                  j.value("page_descriptor", std::string()), j.value("history", std::vector<std::string>{})};
}

json action_to_json(const ScoredAction& a) { return {{"action_id", a.action_id}, {"descriptor", a.descriptor}}; }
ScoredAction action_from_json(const json& j) {
  return ScoredAction{j.at("action_id").get<std::string>(), j.value("descriptor", std::string())};
}

}  // namespace

// ---------------------------------------------------------------------------

json graph_to_json(const KnowledgeGraph& g) {
  json states = json::array();
  for (const auto& [_, s] : g.states()) {
    states.push_back({{"state_id", s.state_id},
                      {"page_descriptor", s.page_descriptor},
                      {"feature", s.feature},
                      {"elements", elements_to_json(s.elements)},
                      {"is_terminal", s.is_terminal}});
  }
  json actions = json::array();
  for (const auto& [_, a] : g.actions()) {
    json seq = json::array();
    for (const auto& st : a.element_sequence) {
      seq.push_back({{"element_id", st.element_id}, {"atomic_action", st.atomic_action}, {"order", st.order}});
    }
    actions.push_back({{"action_id", a.action_id},
                       {"kind", a.kind == ActionKind::group ? "group" : "atomic"},
                       {"functional_descriptor", a.functional_descriptor},
                       {"source_element", a.source_element ? json(*a.source_element) : json(nullptr)},
                       {"atomic_action", a.atomic_action},
                       {"element_sequence", seq}});
  }
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({{"from", e.from}, {"to", e.to}});
  return {{"schema_version", g.schema_version()},
          {"feature_dim", g.feature_dim()},
          {"states", states},
          {"actions", actions},
          {"edges", edges}};
}

KnowledgeGraph graph_from_json(const json& j) {
  check_schema(j, "graph");
  return guarded("graph", [&] {
    KnowledgeGraph g(j.at("feature_dim").get<int>());
    std::map<std::string, bool> terminal_flags;
    for (const auto& s : j.at("states")) {
      StateNode n;
      n.state_id = s.at("state_id").get<std::string>();
      n.page_descriptor = s.at("page_descriptor").get<std::string>();
      n.feature = s.at("feature").get<std::vector<double>>();
      n.elements = elements_from_json(s.at("elements"));
      terminal_flags[n.state_id] = s.value("is_terminal", true);
      g.add_state(std::move(n));
    }
    std::map<std::string, std::vector<std::string>> from_of, to_of;
    for (const auto& e : j.at("edges")) {
      const auto from = e.at("from").get<std::string>();
      const auto to = e.at("to").get<std::string>();
      to_of[from].push_back(to);
      from_of[to].push_back(from);
    }
    for (const auto& a : j.at("actions")) {
      ActionNode n;
      n.action_id = a.at("action_id").get<std::string>();
      const auto kind = a.at("kind").get<std::string>();
      if (kind != "atomic" && kind != "group") throw Error(ErrorCode::invalid_argument, "unknown action kind " + kind);
      n.kind = kind == "group" ? ActionKind::group : ActionKind::atomic;
      n.functional_descriptor = a.at("functional_descriptor").get<std::string>();
      if (a.contains("source_element") && !a.at("source_element").is_null()) {
        n.source_element = a.at("source_element").get<std::string>();
      }
      n.atomic_action = a.value("atomic_action", std::string("tap"));
      for (const auto& st : a.at("element_sequence")) {
        n.element_sequence.push_back(ElementStep{st.at("element_id").get<std::string>(),
                                                 st.at("atomic_action").get<std::string>(), st.at("order").get<int>()});
      }
      const auto& froms = from_of[n.action_id];
      const auto& tos = to_of[n.action_id];
      if (froms.size() != 1 || tos.size() != 1) {
        throw Error(ErrorCode::invalid_argument,
                    "action " + n.action_id + " needs exactly one incoming and one outgoing edge");
      }
      g.add_action(std::move(n), froms.front(), tos.front());
    }
    if (g.edges().size() != j.at("edges").size()) {
      throw Error(ErrorCode::invalid_argument, "graph has edges that do not belong to an action");
    }
    for (const auto& [id, flag] : terminal_flags) {
      if (g.state(id).is_terminal != flag) {
        throw Error(ErrorCode::invalid_argument, "state " + id + " has an inconsistent is_terminal flag");
      }
    }
    return g;
  });
}

void save_graph(const std::string& path, const KnowledgeGraph& g) { write_text(path, graph_to_json(g).dump(1) + "\n"); }
KnowledgeGraph load_graph(const std::string& path) { return graph_from_json(parse_json(read_text(path), path)); }

// ---------------------------------------------------------------------------

json trajectory_to_json(const Trajectory& t) {
  json steps = json::array();
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    const auto& s = t.states[i];
    steps.push_back({{"state",
                      {{"observation_id", s.observation_id},
                       {"page_descriptor", s.page_descriptor},
                       {"feature", s.feature},
                       {"elements", elements_to_json(s.elements)}}}});
    if (i < t.actions.size()) {
      const auto& a = t.actions[i];
      steps.push_back({{"action",
                        {{"action_id", a.action_id},
                         {"source_element", a.source_element},
                         {"atomic_action", a.atomic_action},
                         {"descriptor", a.descriptor}}}});
    }
  }
  return {{"schema_version", kSchemaVersion}, {"provenance", t.provenance}, {"steps", steps}};
}

Trajectory trajectory_from_json(const json& j) {
  check_schema(j, "trajectory");
  return guarded("trajectory", [&] {
    Trajectory t;
    t.provenance = j.value("provenance", std::string());
    const auto& steps = j.at("steps");
    if (steps.empty() || steps.size() % 2 == 0) {
      throw Error(ErrorCode::invalid_argument, "trajectory steps must alternate state/action and have odd length");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& st = steps[i];
      if (i % 2 == 0) {
        if (!st.contains("state")) throw Error(ErrorCode::invalid_argument, "expected a state at step " + std::to_string(i));
        const auto& s = st.at("state");
        t.states.push_back(StateObservation{s.at("observation_id").get<std::string>(),
                                            s.value("page_descriptor", std::string()),
                                            s.at("feature").get<std::vector<double>>(),
                                            elements_from_json(s.value("elements", json::array()))});
      } else {
        if (!st.contains("action")) throw Error(ErrorCode::invalid_argument, "expected an action at step " + std::to_string(i));
        const auto& a = st.at("action");
        t.actions.push_back(ActionRecord{a.value("action_id", std::string()), a.value("source_element", std::string()),
                                         a.value("atomic_action", std::string("tap")),
                                         a.value("descriptor", std::string())});
      }
    }
    return t;
  });
}

std::string trajectories_to_jsonl(const std::vector<Trajectory>& ts) {
  std::string out;
  for (const auto& t : ts) out += trajectory_to_json(t).dump() + "\n";
  return out;
}

std::vector<Trajectory> trajectories_from_jsonl(const std::string& text) {
  std::vector<Trajectory> out;
  for (const auto& line : split_lines(text)) out.push_back(trajectory_from_json(parse_json(line, "trajectory")));
  return out;
}

// ---------------------------------------------------------------------------

json path_to_json(const Path& p) { return {{"states", p.states}, {"actions", p.actions}}; }
Path path_from_json(const json& j) {
  return Path{j.at("states").get<std::vector<std::string>>(), j.at("actions").get<std::vector<std::string>>()};
}

json env_to_json(const SynthEnv& env) {
  const auto& c = env.config;
  json tasks = json::array();
  for (const auto& t : env.tasks) {
    tasks.push_back({{"id", t.id}, {"instruction", t.instruction}, {"goals", t.goals}, {"optimal", path_to_json(t.optimal)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"config",
           {{"branching", c.branching},
            {"depth", c.depth},
            {"goal_count", c.goal_count},
            {"dag_merge_prob", c.dag_merge_prob},
            {"seed", c.seed},
            {"feature_dim", c.feature_dim},
            {"distractors", c.distractors},
            {"forced_steps", c.forced_steps}}},
          {"root", env.root},
          {"horizon", env.horizon},
          {"truth", graph_to_json(*env.truth)},
          {"tasks", tasks}};
}

SynthEnv env_from_json(const json& j) {
  check_schema(j, "env");
  return guarded("env", [&] {
    SynthEnv env;
    const auto& c = j.at("config");
    env.config.branching = c.at("branching").get<int>();
    env.config.depth = c.at("depth").get<int>();
    env.config.goal_count = c.at("goal_count").get<int>();
    env.config.dag_merge_prob = c.at("dag_merge_prob").get<double>();
    env.config.seed = c.at("seed").get<std::uint64_t>();
    env.config.feature_dim = c.at("feature_dim").get<int>();
    env.config.distractors = c.at("distractors").get<int>();
    env.config.forced_steps = c.at("forced_steps").get<int>();
    env.root = j.at("root").get<std::string>();
    env.horizon = j.at("horizon").get<int>();
    env.truth = std::make_shared<const KnowledgeGraph>(graph_from_json(j.at("truth")));
    for (const auto& t : j.at("tasks")) {
      env.tasks.push_back(Task{t.at("id").get<std::string>(), t.at("instruction").get<std::string>(),
                               t.at("goals").get<std::set<std::string>>(), path_from_json(t.at("optimal"))});
    }
    return env;
  });
}

void save_env(const std::string& path, const SynthEnv& env) { write_text(path, env_to_json(env).dump(1) + "\n"); }
SynthEnv load_env(const std::string& path) { return env_from_json(parse_json(read_text(path), path)); }

// ---------------------------------------------------------------------------

json model_to_json(const QScorer& m) {
  const auto& e = m.encoder();
  return {{"schema_version", kSchemaVersion},
          {"encoder", {{"dim", e.dim}, {"seed", e.hash_seed}, {"fields", field_names(e.fields)}, {"probes", e.probes}}},
          {"hidden", m.hidden()},
          {"parameters", m.parameters()}};
}

QScorer model_from_json(const json& j) {
  check_schema(j, "model");
  return guarded("model", [&] {
    FeatureEncoder enc;
    const auto& e = j.at("encoder");
    enc.dim = e.at("dim").get<int>();
    enc.hash_seed = e.at("seed").get<std::uint64_t>();
    enc.fields = parse_fields(e.at("fields").get<std::vector<std::string>>());
    enc.probes = e.at("probes").get<int>();
    QScorer m(enc, j.at("hidden").get<int>());
    m.set_parameters(j.at("parameters").get<std::vector<double>>());
    return m;
  });
}

void save_model(const std::string& path, const QScorer& m) { write_text(path, model_to_json(m).dump() + "\n"); }
QScorer load_model(const std::string& path) { return model_from_json(parse_json(read_text(path), path)); }

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += json{{"schema_version", kSchemaVersion},
                {"context", context_to_json(p.context)},
                {"positive", action_to_json(p.positive)},
                {"negative", action_to_json(p.negative)}}
               .dump() +
           "\n";
  }
  return out;
}

std::vector<PreferencePair> pairs_from_jsonl(const std::string& text) {
  std::vector<PreferencePair> out;
  for (const auto& line : split_lines(text)) {
    const auto j = parse_json(line, "pair");
    check_schema(j, "pair");
    out.push_back(guarded("pair", [&] {
      return PreferencePair{context_from_json(j.at("context")), action_from_json(j.at("positive")),
                            action_from_json(j.at("negative"))};
    }));
  }
  return out;
}

std::string samples_to_jsonl(const std::vector<TrainSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += json{{"schema_version", kSchemaVersion},
                {"context", context_to_json(s.context)},
                {"action", action_to_json(s.action)},
                {"target", s.target}}
               .dump() +
           "\n";
  }
  return out;
}

std::vector<TrainSample> samples_from_jsonl(const std::string& text) {
  std::vector<TrainSample> out;
  for (const auto& line : split_lines(text)) {
    const auto j = parse_json(line, "sample");
    check_schema(j, "sample");
    out.push_back(guarded("sample", [&] {
      return TrainSample{context_from_json(j.at("context")), action_from_json(j.at("action")),
                         j.at("target").get<double>()};
    }));
  }
  return out;
}

// ---------------------------------------------------------------------------

json rules_to_json(const std::vector<MergeRule>& rules, std::size_t delta_f) {
  json arr = json::array();
  for (const auto& r : rules) {
    arr.push_back({{"left", r.left}, {"right", r.right}, {"new_id", r.new_id}, {"frequency", r.frequency},
                   {"iteration", r.iteration}});
  }
  return {{"schema_version", kSchemaVersion}, {"delta_f", delta_f}, {"rules", arr}};
}

std::vector<MergeRule> rules_from_json(const json& j) {
  check_schema(j, "rules");
  return guarded("rules", [&] {
    std::vector<MergeRule> out;
    for (const auto& r : j.at("rules")) {
      out.push_back(MergeRule{r.at("left").get<std::string>(), r.at("right").get<std::string>(),
                              r.at("new_id").get<std::string>(), r.at("frequency").get<std::size_t>(),
                              r.at("iteration").get<int>()});
    }
    return out;
  });
}

json ranked_paths_to_json(const std::vector<RankedPath>& paths, const std::string& task, const std::string& strategy) {
  json arr = json::array();
  for (const auto& r : paths) {
    arr.push_back({{"actions", r.path.actions},
                   {"states", r.path.states},
                   {"node_q", r.node_q},
                   {"mean_q", r.mean_q},
                   {"score", r.score},
                   {"visits", r.visits}});
  }
  return {{"schema_version", kSchemaVersion}, {"task", task}, {"strategy", strategy}, {"paths", arr}};
}

std::vector<RankedPath> ranked_paths_from_json(const json& j) {
  check_schema(j, "ranked paths");
  return guarded("ranked paths", [&] {
    std::vector<RankedPath> out;
    for (const auto& r : j.at("paths")) {
      RankedPath p;
      p.path = Path{r.at("states").get<std::vector<std::string>>(), r.at("actions").get<std::vector<std::string>>()};
      p.node_q = r.at("node_q").get<std::vector<double>>();
      p.mean_q = r.at("mean_q").get<double>();
      p.score = r.at("score").get<double>();
      p.visits = r.at("visits").get<std::int64_t>();
      out.push_back(std::move(p));
    }
    return out;
  });
}

}  // namespace eam
