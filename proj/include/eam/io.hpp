#pragma once

// Text file formats. Every document (and every JSONL record) carries
// schema_version; a mismatch raises ErrorCode::schema_mismatch.

#include <string>
#include <vector>

#include <json.hpp>

#include "eam/env.hpp"
#include "eam/graph.hpp"
#include "eam/groups.hpp"
#include "eam/mcts.hpp"
#include "eam/scorer.hpp"

namespace eam {

using json = nlohmann::json;

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);
json parse_json(const std::string& text, const std::string& what);
void check_schema(const json& j, const std::string& what);

json graph_to_json(const KnowledgeGraph& g);
KnowledgeGraph graph_from_json(const json& j);
void save_graph(const std::string& path, const KnowledgeGraph& g);
KnowledgeGraph load_graph(const std::string& path);

json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j);
std::string trajectories_to_jsonl(const std::vector<Trajectory>& ts);
std::vector<Trajectory> trajectories_from_jsonl(const std::string& text);

json path_to_json(const Path& p);
Path path_from_json(const json& j);

json env_to_json(const SynthEnv& env);
SynthEnv env_from_json(const json& j);
void save_env(const std::string& path, const SynthEnv& env);
SynthEnv load_env(const std::string& path);

json model_to_json(const QScorer& m);
QScorer model_from_json(const json& j);
void save_model(const std::string& path, const QScorer& m);
QScorer load_model(const std::string& path);

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> pairs_from_jsonl(const std::string& text);
std::string samples_to_jsonl(const std::vector<TrainSample>& samples);
std::vector<TrainSample> samples_from_jsonl(const std::string& text);

json rules_to_json(const std::vector<MergeRule>& rules, std::size_t delta_f);
std::vector<MergeRule> rules_from_json(const json& j);

json ranked_paths_to_json(const std::vector<RankedPath>& paths, const std::string& task, const std::string& strategy);
std::vector<RankedPath> ranked_paths_from_json(const json& j);

}  // namespace eam
