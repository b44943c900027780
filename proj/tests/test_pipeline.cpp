#include <doctest.h>

#include "eam/pipeline.hpp"
#include "fixtures.hpp"

using namespace eam;

namespace {

SynthEnv g1_env() {
  SynthEnv env;
  env.truth = std::make_shared<const KnowledgeGraph>(fixtures::g1_graph());
  env.root = "s0";
  env.horizon = 2;
  env.tasks.push_back(Task{"g1", "reach s3", {"s3"}, fixtures::g1_optimal()});
  return env;
}

SynthEnv pipeline_env(std::uint64_t seed) {
  SynthEnvConfig c;
  c.branching = 3;
  c.depth = 3;
  c.goal_count = 12;
  c.seed = seed;
  return generate_env(c);
}

PipelineConfig small_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.rounds = 2;
  cfg.batch = 4;
  cfg.hidden = 16;
  cfg.mcts.iterations = 30;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("margin_metric examples") {
  const auto m = fixtures::g1();
  CHECK(margin_metric(ExactOracleQ(m), m, fixtures::g1_optimal()) == doctest::Approx(0.75));
  const LambdaQ constant([](const std::string&, const std::string&, std::size_t) { return 0.4; });
  CHECK(margin_metric(constant, m, fixtures::g1_optimal()) == 0.0);
  const LambdaQ inverted([&](const std::string& s, const std::string& a, std::size_t d) {
    return 1.0 - ExactValues(m).q(s, a, m.horizon - int(d));
  });
  CHECK(margin_metric(inverted, m, fixtures::g1_optimal()) < 0.0);
  CHECK_THROWS_AS(margin_metric(constant, m, Path{{"s0", "s3"}, {"a3"}}), Error);
  CHECK(margin_metric(constant, fixtures::chain(2), Path{{"s0", "s1", "s2"}, {"c0", "c1"}}) == 0.0);
}

TEST_CASE("a G1 round yields samples whose targets equal uniform_q") {
  const auto env = g1_env();
  PipelineConfig cfg;
  cfg.hidden = 4;
  cfg.mcts.iterations = 50;
  const QScorer model = QScorer::random(cfg.encoder, cfg.hidden, 1);
  const auto r = run_round(model, env, nullptr, env.tasks, env.tasks, cfg, 1);
  const auto q = uniform_q(task_mdp(env, env.tasks[0]));
  REQUIRE(r.samples.size() == q.values.size());
  for (const auto& s : r.samples) {
    const auto& g = *env.truth;
    std::string action;
    for (const auto& a : g.available_actions(s.context.state_id)) {
      if (g.action(a).functional_descriptor == s.action.descriptor) action = a;
    }
    CHECK(s.target == q.at(s.context.state_id, action));
  }
  CHECK(r.report.samples == r.samples.size());
  CHECK(r.report.round == 1);
  CHECK_THROWS_AS(run_round(model, env, nullptr, {}, env.tasks, cfg, 1), Error);
}

TEST_CASE("samples are graph edges with targets in [0, 1]") {
  const auto env = pipeline_env(1);
  const auto& task = env.tasks.front();
  const auto m = task_mdp(env, task);
  const QScorer model = QScorer::random(FeatureEncoder{}, 8, 2);
  const ScorerQ qf(std::make_shared<const QScorer>(model));
  const auto samples = samples_from_tree(run_mcts(m, qf, MctsConfig{}), m);
  REQUIRE_FALSE(samples.empty());
  for (const auto& s : samples) {
    CHECK(env.truth->has_state(s.context.state_id));
    bool edge = false;
    for (const auto& a : env.truth->available_actions(s.context.state_id)) edge |= a == s.action.action_id;
    CHECK(edge);
    CHECK(s.target >= 0.0);
    CHECK(s.target <= 1.0);
  }
}

TEST_CASE("zero-epoch refinement leaves the model unchanged") {
  const auto env = pipeline_env(2);
  auto cfg = small_config(3);
  cfg.refine.epochs = 0;
  const QScorer model = QScorer::random(cfg.encoder, cfg.hidden, 4);
  const auto r = run_round(model, env, nullptr, {env.tasks[0]}, {env.tasks[1]}, cfg, 1);
  CHECK(r.model == model);
  CHECK(r.report.success_rate >= 0.0);
  CHECK(r.report.success_rate <= 1.0);
}

TEST_CASE("a one-round pipeline is a single run_round") {
  const auto env = pipeline_env(3);
  auto cfg = small_config(5);
  cfg.rounds = 1;
  cfg.batch = 100;
  const std::vector<Task> train(env.tasks.begin(), env.tasks.begin() + 8);
  const std::vector<Task> eval(env.tasks.begin() + 8, env.tasks.end());
  const auto res = run_pipeline(cfg, env, nullptr, train, eval);
  REQUIRE(res.reports.size() == 1);
  REQUIRE(res.models.size() == 1);
  CHECK(res.initial == initialize_model(*env.truth, train, cfg));

  // The pipeline shuffles the batch, so only order-insensitive quantities are compared.
  const auto direct = run_round(res.initial, env, nullptr, train, eval, cfg, 1);
  CHECK(direct.report.samples == res.reports[0].samples);
}

TEST_CASE("pipelines are reproducible and emit CSV") {
  const auto env = pipeline_env(4);
  const auto cfg = small_config(6);
  const std::vector<Task> train(env.tasks.begin(), env.tasks.begin() + 8);
  const std::vector<Task> eval(env.tasks.begin() + 8, env.tasks.end());
  const auto a = run_pipeline(cfg, env, nullptr, train, eval);
  const auto b = run_pipeline(cfg, env, nullptr, train, eval);
  CHECK(a.reports == b.reports);
  CHECK(a.models == b.models);
  REQUIRE(a.reports.size() == 2);
  for (const auto& r : a.reports) {
    CHECK(r.success_rate >= 0.0);
    CHECK(r.success_rate <= 1.0);
    CHECK(r.loss.size() == std::size_t(cfg.refine.epochs + 1));
  }
  const auto csv = rounds_csv(a.reports);
  CHECK(csv.rfind("round,loss,success_rate,margin,samples\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  auto bad = cfg;
  bad.rounds = 0;
  CHECK_THROWS_AS(run_pipeline(bad, env, nullptr, train, eval), Error);
}

TEST_CASE("the exact oracle succeeds on every task") {
  const auto env = pipeline_env(5);
  for (const auto& t : env.tasks) {
    const auto m = task_mdp(env, t);
    const auto summary = evaluate_tasks(ExactOracleQ(m), env, nullptr, {t}, MctsConfig{});
    CHECK(summary.success_rate == 1.0);
  }
}
