#include <doctest.h>

#include <filesystem>

#include "eam/bench.hpp"
#include "eam/io.hpp"
#include "fixtures.hpp"

using namespace eam;

namespace {

std::string tmp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "eam_test_io";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

SynthEnv small_env() {
  SynthEnvConfig c;
  c.branching = 2;
  c.depth = 3;
  c.forced_steps = 1;
  c.goal_count = 3;
  c.seed = 8;
  return generate_env(c);
}

}  // namespace

TEST_CASE("graphs round-trip through JSON and files") {
  const auto env = small_env();
  const auto g = with_action_groups(*env.truth, 2);
  CHECK(graph_from_json(graph_to_json(g)) == g);
  const auto path = tmp_path("graph.json");
  save_graph(path, g);
  CHECK(load_graph(path) == g);
  CHECK(graph_to_json(load_graph(path)).dump() == graph_to_json(g).dump());

  auto bad = graph_to_json(g);
  bad["schema_version"] = kSchemaVersion + 1;
  CHECK(code_of([&] { graph_from_json(bad); }) == ErrorCode::schema_mismatch);
  bad.erase("schema_version");
  CHECK(code_of([&] { graph_from_json(bad); }) == ErrorCode::schema_mismatch);
  CHECK(code_of([&] { load_graph(tmp_path("missing.json")); }) == ErrorCode::io);
  CHECK(code_of([&] { parse_json("{not json", "x"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("trajectories round-trip through JSONL") {
  const auto env = small_env();
  ExploreConfig cfg;
  cfg.k = 2;
  cfg.p_flip = 0.5;
  const auto ts = dfs_explore(env, env.tasks.front(), cfg).trajectories;
  REQUIRE_FALSE(ts.empty());
  CHECK(trajectories_from_jsonl(trajectories_to_jsonl(ts)) == ts);
  CHECK(trajectory_from_json(trajectory_to_json(ts.front())) == ts.front());
  CHECK(trajectories_from_jsonl("").empty());
}

TEST_CASE("environments round-trip") {
  const auto env = small_env();
  CHECK(env_from_json(env_to_json(env)) == env);
  const auto path = tmp_path("env.json");
  save_env(path, env);
  CHECK(load_env(path) == env);
}

TEST_CASE("models round-trip with identical scores") {
  FeatureEncoder enc;
  enc.dim = 64;
  enc.hash_seed = 17;
  enc.fields = kFieldInstruction | kFieldAction | kFieldCross;
  const auto m = QScorer::random(enc, 8, 3, 0.7);
  const auto path = tmp_path("model.json");
  save_model(path, m);
  const auto back = load_model(path);
  CHECK(back == m);
  const auto g = fixtures::g1_graph();
  for (const auto& [id, _] : g.actions()) {
    const auto c = context_for(g, "reach s3", g.source_of(id), {});
    CHECK(back.score(c, scored_action(g, id)) == m.score(c, scored_action(g, id)));
  }
  auto j = model_to_json(m);
  j["parameters"].erase(0);
  CHECK_THROWS_AS(model_from_json(j), Error);
}

TEST_CASE("pairs, samples, paths and rules round-trip") {
  const auto g = fixtures::g1_graph();
  const auto pairs = build_preference_pairs({ExpertPath{"reach s3", fixtures::g1_optimal()}}, g, 0);
  const auto pairs_back = pairs_from_jsonl(pairs_to_jsonl(pairs));
  REQUIRE(pairs_back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs_back[i].context == pairs[i].context);
    CHECK(pairs_back[i].positive == pairs[i].positive);
    CHECK(pairs_back[i].negative == pairs[i].negative);
  }

  const std::vector<TrainSample> samples{TrainSample{pairs[0].context, pairs[0].positive, 0.7679123456789}};
  const auto samples_back = samples_from_jsonl(samples_to_jsonl(samples));
  REQUIRE(samples_back.size() == 1);
  CHECK(samples_back[0].target == samples[0].target);
  CHECK(samples_back[0].context == samples[0].context);

  CHECK(path_from_json(path_to_json(fixtures::g1_optimal())) == fixtures::g1_optimal());

  const auto rules = mine_groups(PathCorpus::from_paths({{"a", "b", "c"}, {"a", "b", "c"}}), 2);
  const auto rj = rules_to_json(rules, 2);
  CHECK(rj.at("delta_f") == 2);
  CHECK(rules_from_json(rj) == rules);

  const auto m = fixtures::g1();
  const auto ranked = extract_top_k(run_mcts(m, ExactOracleQ(m), MctsConfig{}), 5);
  CHECK(ranked_paths_from_json(ranked_paths_to_json(ranked, "t0", "mcts")) == ranked);
}

TEST_CASE("JSONL records each carry a schema version") {
  const auto g = fixtures::g1_graph();
  const auto pairs = build_preference_pairs({ExpertPath{"reach s3", fixtures::g1_optimal()}}, g, 0);
  auto text = pairs_to_jsonl(pairs);
  const auto pos = text.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 18, "\"schema_version\":9");
  CHECK(code_of([&] { pairs_from_jsonl(text); }) == ErrorCode::schema_mismatch);
}
