#include "eam/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

namespace eam {

void check_config(const PipelineConfig& cfg) {
  if (cfg.rounds < 1) throw Error(ErrorCode::invalid_argument, "rounds must be >= 1");
  if (cfg.batch < 1) throw Error(ErrorCode::invalid_argument, "batch must be >= 1");
  if (cfg.init.epochs < 0 || cfg.refine.epochs < 0) throw Error(ErrorCode::invalid_argument, "epochs must be >= 0");
  if (cfg.init_tasks < 0) throw Error(ErrorCode::invalid_argument, "init_tasks must be >= 0");
}

double margin_metric(const QFunction& qf, const KgMdp& m, const Path& tau_star) {
  check_path(m, tau_star);
  double sum = 0;
  int steps = 0;
  for (std::size_t t = 0; t < tau_star.actions.size(); ++t) {
    const auto& s = tau_star.states[t];
    const auto actions = m.graph->available_actions(s);
    if (actions.size() < 2) continue;
    const std::span<const std::string> history(tau_star.actions.data(), t);
    double best_other = -std::numeric_limits<double>::infinity();
    for (const auto& a : actions) {
      if (a != tau_star.actions[t]) best_other = std::max(best_other, qf.evaluate(m, s, a, history));
    }
    sum += qf.evaluate(m, s, tau_star.actions[t], history) - best_other;
    ++steps;
  }
  return steps == 0 ? 0.0 : sum / steps;
}

EvalSummary evaluate_tasks(const QFunction& qf, const SynthEnv& env, std::shared_ptr<const KnowledgeGraph> graph,
                           const std::vector<Task>& tasks, const MctsConfig& mcts) {
  if (tasks.empty()) return {};
  EvalSummary out;
  int with_reference = 0;
  for (const auto& t : tasks) {
    const KgMdp m = task_mdp(env, t, graph);
    const auto top = extract_top_k(run_mcts(m, qf, mcts), 1);
    if (!top.empty() && path_reward(m, top.front().path) == 1.0) out.success_rate += 1.0;
    // Tasks the graph cannot solve have no reference path and no margin.
    if (const auto ref = reference_path(m, t)) {
      out.margin += margin_metric(qf, m, *ref);
      ++with_reference;
    }
  }
  out.success_rate /= static_cast<double>(tasks.size());
  if (with_reference > 0) out.margin /= static_cast<double>(with_reference);
  return out;
}

std::vector<TrainSample> samples_from_tree(const SearchTree& tree, const KgMdp& m) {
  std::vector<TrainSample> out;
  for (const auto& bt : bellman_targets(tree, m)) {
    const auto& node = tree.nodes[static_cast<std::size_t>(bt.node)];
    if (!node.expanded && !node.terminal) continue;
    TrainSample s;
    s.context = context_for(*m.graph, m.instruction, bt.state, bt.history);
    s.action = scored_action(*m.graph, bt.action);
    s.target = bt.target;
    out.push_back(std::move(s));
  }
  return out;
}

RoundResult run_round(const QScorer& model, const SynthEnv& env, std::shared_ptr<const KnowledgeGraph> graph,
                      const std::vector<Task>& batch, const std::vector<Task>& eval_tasks, const PipelineConfig& cfg,
                      int round) {
  if (batch.empty()) throw Error(ErrorCode::invalid_argument, "run_round needs a non-empty batch");
  if (!graph) graph = env.truth;
  RoundResult r{model, {}, {}};
  {
    const ScorerQ qf(std::make_shared<const QScorer>(model));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const KgMdp m = task_mdp(env, batch[i], graph);
      MctsConfig mc = cfg.mcts;
      mc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(round) * 1000 + i);
      auto samples = samples_from_tree(run_mcts(m, qf, mc), m);
      r.samples.insert(r.samples.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }
  }
  if (!r.samples.empty()) {
    r.report.loss = refine_train(r.model, r.samples, cfg.refine.epochs, cfg.refine.lr,
                                 derive_seed(cfg.seed, 0x5000 + static_cast<std::uint64_t>(round)));
  }
  const ScorerQ updated(std::make_shared<const QScorer>(r.model));
  const auto eval = evaluate_tasks(updated, env, graph, eval_tasks, cfg.mcts);
  r.report.round = round;
  r.report.success_rate = eval.success_rate;
  r.report.margin = eval.margin;
  r.report.samples = r.samples.size();
  return r;
}

QScorer initialize_model(const KnowledgeGraph& graph, const std::vector<Task>& train_tasks,
                         const PipelineConfig& cfg) {
  QScorer model = QScorer::random(cfg.encoder, cfg.hidden, derive_seed(cfg.seed, 0x1000));
  std::vector<ExpertPath> experts;
  // Non-owning handle: the MDPs below do not outlive this call.
  const std::shared_ptr<const KnowledgeGraph> view(std::shared_ptr<void>(), &graph);
  for (std::size_t i = 0; i < train_tasks.size() && i < static_cast<std::size_t>(cfg.init_tasks); ++i) {
    const auto& t = train_tasks[i];
    if (t.optimal.states.empty()) continue;
    const auto m = make_mdp(view, t.instruction, goal_set_reward(t.goals), static_cast<int>(t.optimal.actions.size()),
                            t.optimal.states.front());
    if (const auto ref = reference_path(m, t)) experts.push_back(ExpertPath{t.instruction, *ref});
  }
  const auto pairs = build_preference_pairs(experts, graph, derive_seed(cfg.seed, 0x2000));
  if (!pairs.empty() && cfg.init.epochs > 0) {
    init_train(model, pairs, cfg.init.epochs, cfg.init.lr, derive_seed(cfg.seed, 0x3000));
  }
  return model;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const SynthEnv& env, std::shared_ptr<const KnowledgeGraph> graph,
                            const std::vector<Task>& train_tasks, const std::vector<Task>& eval_tasks) {
  check_config(cfg);
  if (!graph) graph = env.truth;
  return run_pipeline(cfg, initialize_model(*graph, train_tasks, cfg), env, graph, train_tasks, eval_tasks);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const QScorer& initial, const SynthEnv& env,
                            std::shared_ptr<const KnowledgeGraph> graph, const std::vector<Task>& train_tasks,
                            const std::vector<Task>& eval_tasks) {
  check_config(cfg);
  if (train_tasks.empty()) throw Error(ErrorCode::invalid_argument, "pipeline needs training tasks");
  if (!graph) graph = env.truth;
  PipelineResult out{initial, {}, {}};
  QScorer model = initial;
  for (int r = 1; r <= cfg.rounds; ++r) {
    std::vector<Task> order = train_tasks;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x4000 + static_cast<std::uint64_t>(r)));
    std::shuffle(order.begin(), order.end(), rng);
    if (order.size() > static_cast<std::size_t>(cfg.batch)) order.resize(static_cast<std::size_t>(cfg.batch));
    auto res = run_round(model, env, graph, order, eval_tasks, cfg, r);
    model = res.model;
    out.models.push_back(res.model);
    out.reports.push_back(std::move(res.report));
  }
  return out;
}

std::string rounds_csv(const std::vector<RoundReport>& reports) {
  std::ostringstream out;
  out.precision(17);
  out << "round,loss,success_rate,margin,samples\n";
  for (const auto& r : reports) {
    out << r.round << ',' << (r.loss.empty() ? 0.0 : r.loss.back()) << ',' << r.success_rate << ',' << r.margin << ','
        << r.samples << '\n';
  }
  return out.str();
}

}  // namespace eam
