#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "eam/bench.hpp"
#include "eam/env.hpp"
#include "eam/groups.hpp"
#include "eam/io.hpp"
#include "eam/mcts.hpp"
#include "eam/mdp.hpp"
#include "eam/pipeline.hpp"
#include "eam/scorer.hpp"

using namespace eam;
namespace fs = std::filesystem;

namespace {

// Exit status when verify runs but a property fails.
constexpr int kVerifyFailed = 10;

std::string split_join_error(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "; ") + l;
  return out;
}

std::shared_ptr<const KnowledgeGraph> load_shared_graph(const std::string& path) {
  return std::make_shared<const KnowledgeGraph>(load_graph(path));
}

BiasMode parse_bias_mode(const std::string& s) {
  if (s == "random") return BiasMode::random;
  if (s == "adversarial") return BiasMode::adversarial;
  throw Error(ErrorCode::invalid_argument, "unknown noise mode: " + s);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// Train/eval split of an env's tasks: the first two thirds train, the rest evaluate.
std::pair<std::vector<Task>, std::vector<Task>> split_tasks(const std::vector<Task>& tasks, int train) {
  if (tasks.empty()) throw Error(ErrorCode::invalid_argument, "environment has no tasks");
  std::size_t n = train > 0 ? std::size_t(train) : (tasks.size() * 2 + 2) / 3;
  n = std::min(n, tasks.size());
  std::vector<Task> a(tasks.begin(), tasks.begin() + long(n));
  std::vector<Task> b(tasks.begin() + long(n), tasks.end());
  if (b.empty()) b = a;
  return {a, b};
}

struct Args {
  // shared
  std::string env, graph, graph_out, out, model, out_dir, csv, task, pairs, samples, pairs_out, summary;
  std::uint64_t seed = 0;
  // gen-env
  int k = 3, depth = 3, goals = 1, forced = 0, feature_dim = 16;
  double merge_prob = 0.0;
  // explore
  int budget = 1000, max_depth = 0;
  double p_flip = 0.0;
  // build-kg
  std::vector<std::string> trajectories;
  double tau_coarse = 0.95, tau_iou = 0.5;
  // mine-groups
  std::size_t delta_f = 3;
  bool no_compact = false;
  // training
  int epochs = 1, hidden = 64, dim = 256, init_tasks = 4;
  double lr = 0.1;
  // self-train
  int rounds = 4, batch = 20, train = 0;
  // extract
  std::string strategy = "mcts";
  int iters = 50, topk = 5, bon = 10;
  double c = 10.0, noise = 0.0;
  std::string noise_mode = "random";
  // verify
  int instances = 200, horizon = 8, rollouts = 10000, pairs_n = 50;
  // bench
  std::string axis = "strategy";
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{0};
};

int cmd_gen_env(const Args& a) {
  SynthEnvConfig c;
  c.branching = a.k;
  c.depth = a.depth;
  c.goal_count = a.goals;
  c.dag_merge_prob = a.merge_prob;
  c.forced_steps = a.forced;
  c.feature_dim = a.feature_dim;
  c.seed = a.seed;
  const auto env = generate_env(c);
  ensure_parent(a.out);
  save_env(a.out, env);
  std::cout << "env: " << env.truth->states().size() << " states, " << env.truth->actions().size() << " actions, "
            << env.tasks.size() << " tasks, horizon " << env.horizon << "\n";
  return 0;
}

int cmd_explore(const Args& a) {
  const auto env = load_env(a.env);
  ExploreConfig c;
  c.k = a.k;
  c.budget = a.budget;
  c.max_depth = a.max_depth;
  c.seed = a.seed;
  c.p_flip = a.p_flip;
  std::vector<Trajectory> all;
  int steps = 0;
  auto run = [&](const Task& t) {
    const auto r = dfs_explore(env, t, c);
    all.insert(all.end(), r.trajectories.begin(), r.trajectories.end());
    steps += r.steps;
  };
  if (a.task.empty()) {
    for (const auto& t : env.tasks) run(t);
  } else {
    run(env.task(a.task));
  }
  ensure_parent(a.out);
  write_text(a.out, trajectories_to_jsonl(all));
  std::cout << "explore: " << all.size() << " trajectories, " << steps << " steps\n";
  return 0;
}

int cmd_build_kg(const Args& a) {
  std::vector<Trajectory> ts;
  for (const auto& f : a.trajectories) {
    auto part = trajectories_from_jsonl(read_text(f));
    ts.insert(ts.end(), part.begin(), part.end());
  }
  int dim = a.feature_dim;
  if (!ts.empty() && !ts.front().states.empty()) dim = int(ts.front().states.front().feature.size());
  KnowledgeGraph g(dim);
  if (!a.graph.empty()) g = load_graph(a.graph);
  DedupConfig dc;
  dc.tau_coarse = a.tau_coarse;
  dc.tau_iou = a.tau_iou;
  TemplateDescriptorProvider provider;
  for (const auto& t : ts) merge_trajectory(g, t, dc, provider);
  if (const auto problems = validate(g); !problems.empty()) {
    throw Error(ErrorCode::invalid_argument, "built graph is invalid: " + split_join_error(problems));
  }
  ensure_parent(a.out);
  save_graph(a.out, g);
  std::cout << "graph: " << g.states().size() << " states, " << g.actions().size() << " actions\n";
  return 0;
}

int cmd_mine_groups(const Args& a) {
  auto g = load_graph(a.graph);
  const auto rules = mine_groups(path_corpus(g), a.delta_f);
  const auto report = install_groups(g, rules);
  if (!a.no_compact) compact_groups(g);
  ensure_parent(a.out);
  write_text(a.out, rules_to_json(rules, a.delta_f).dump(2) + "\n");
  std::string graph_out = a.graph_out;
  if (graph_out.empty()) graph_out = (fs::path(a.out).parent_path() / "grouped_graph.json").string();
  ensure_parent(graph_out);
  save_graph(graph_out, g);
  std::cout << "groups: " << rules.size() << " rules, " << report.installed.size() << " installed, "
            << report.skipped.size() << " skipped; graph written to " << graph_out << "\n";
  return 0;
}

FeatureEncoder encoder_for(const Args& a) {
  FeatureEncoder e;
  e.dim = a.dim;
  e.hash_seed = a.seed;
  return e;
}

int cmd_init_train(const Args& a) {
  std::vector<PreferencePair> pairs;
  if (!a.pairs.empty()) {
    pairs = pairs_from_jsonl(read_text(a.pairs));
  } else {
    if (a.env.empty()) throw Error(ErrorCode::invalid_argument, "init-train needs --pairs or --env");
    const auto env = load_env(a.env);
    const auto graph = a.graph.empty() ? env.truth : load_shared_graph(a.graph);
    std::vector<ExpertPath> expert;
    const auto [train, eval] = split_tasks(env.tasks, a.train);
    for (std::size_t i = 0; i < train.size() && int(i) < a.init_tasks; ++i) {
      if (const auto ref = reference_path(task_mdp(env, train[i], graph), train[i])) {
        expert.push_back(ExpertPath{train[i].instruction, *ref});
      }
    }
    pairs = build_preference_pairs(expert, *graph, a.seed);
    if (!a.pairs_out.empty()) {
      ensure_parent(a.pairs_out);
      write_text(a.pairs_out, pairs_to_jsonl(pairs));
    }
  }
  auto model = QScorer::random(encoder_for(a), a.hidden, a.seed);
  const auto trace = init_train(model, pairs, a.epochs, a.lr, a.seed);
  ensure_parent(a.out);
  save_model(a.out, model);
  std::printf("init-train: %zu pairs, loss %.6f -> %.6f\n", pairs.size(), trace.front(), trace.back());
  return 0;
}

int cmd_refine_train(const Args& a) {
  auto model = load_model(a.model);
  const auto samples = samples_from_jsonl(read_text(a.samples));
  const auto trace = refine_train(model, samples, a.epochs, a.lr, a.seed);
  ensure_parent(a.out);
  save_model(a.out, model);
  std::printf("refine-train: %zu samples, loss %.6f -> %.6f\n", samples.size(), trace.front(), trace.back());
  return 0;
}

int cmd_self_train(const Args& a) {
  const auto env = load_env(a.env);
  const auto graph = a.graph.empty() ? nullptr : load_shared_graph(a.graph);
  const auto [train, eval] = split_tasks(env.tasks, a.train);
  PipelineConfig cfg;
  cfg.rounds = a.rounds;
  cfg.batch = a.batch;
  cfg.mcts.iterations = a.iters;
  cfg.mcts.c = a.c;
  cfg.mcts.top_k = a.topk;
  cfg.hidden = a.hidden;
  cfg.encoder = encoder_for(a);
  cfg.init_tasks = a.init_tasks;
  cfg.seed = a.seed;
  const auto res = a.model.empty() ? run_pipeline(cfg, env, graph, train, eval)
                                   : run_pipeline(cfg, load_model(a.model), env, graph, train, eval);
  fs::create_directories(a.out_dir);
  write_text((fs::path(a.out_dir) / "rounds.csv").string(), rounds_csv(res.reports));
  save_model((fs::path(a.out_dir) / "model_round_0.json").string(), res.initial);
  for (std::size_t r = 0; r < res.models.size(); ++r) {
    save_model((fs::path(a.out_dir) / ("model_round_" + std::to_string(r + 1) + ".json")).string(), res.models[r]);
  }
  save_model((fs::path(a.out_dir) / "model.json").string(), res.models.back());
  for (const auto& r : res.reports) {
    std::printf("round %d: success %.3f margin %.4f loss %.6f samples %zu\n", r.round, r.success_rate, r.margin,
                r.loss.back(), r.samples);
  }
  return 0;
}

int cmd_extract(const Args& a) {
  const auto env = load_env(a.env);
  const auto graph = a.graph.empty() ? env.truth : load_shared_graph(a.graph);
  const auto& task = a.task.empty() ? env.tasks.front() : env.task(a.task);
  const auto m = task_mdp(env, task, graph);
  std::unique_ptr<QFunction> qf;
  if (!a.model.empty()) {
    qf = std::make_unique<ScorerQ>(std::make_shared<const QScorer>(load_model(a.model)));
  } else if (a.noise > 0.0) {
    qf = std::make_unique<NoisyOracleQ>(m, a.noise, parse_bias_mode(a.noise_mode), a.seed);
  } else {
    qf = std::make_unique<ExactOracleQ>(m);
  }
  MctsConfig mc;
  mc.iterations = a.iters;
  mc.c = a.c;
  mc.top_k = a.topk;
  mc.seed = a.seed;
  std::vector<RankedPath> ranked;
  if (a.strategy == "mcts") {
    const auto tree = run_mcts(m, *qf, mc);
    ranked = extract_top_k(tree, a.topk);
    if (!a.samples.empty()) {
      ensure_parent(a.samples);
      write_text(a.samples, samples_to_jsonl(samples_from_tree(tree, m)));
    }
  } else if (a.strategy == "bon") {
    ranked = best_of_n(m, *qf, a.bon, a.topk, a.seed);
  } else if (a.strategy == "greedy") {
    const auto p = greedy_extract(m, *qf);
    RankedPath r;
    r.path = p;
    for (std::size_t i = 0; i < p.actions.size(); ++i) {
      const std::vector<std::string> history(p.actions.begin(), p.actions.begin() + long(i));
      r.node_q.push_back(qf->evaluate(m, p.states[i], p.actions[i], history));
    }
    if (!r.node_q.empty()) {
      for (double q : r.node_q) r.mean_q += q;
      r.mean_q /= double(r.node_q.size());
    }
    r.score = r.mean_q;
    ranked.push_back(r);
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown strategy: " + a.strategy);
  }
  ensure_parent(a.out);
  write_text(a.out, ranked_paths_to_json(ranked, task.id, a.strategy).dump(2) + "\n");
  const bool success = !ranked.empty() && path_reward(m, ranked.front().path) == 1.0;
  std::cout << "extract: " << ranked.size() << " paths, top-1 " << (ranked.empty() ? "-" : to_string(ranked.front().path))
            << " success " << (success ? 1 : 0) << "\n";
  return 0;
}

struct VerifyRow {
  std::string instance;
  int states = 0;
  double greedy_reward = 0, optimal_reward = 0, delta_min = 0, rollout_error = 0;
  bool greedy_ok = false, rollout_ok = false;
};

int cmd_verify(const Args& a) {
  std::vector<std::pair<std::string, KgMdp>> mdps;
  if (!a.env.empty()) {
    const auto env = load_env(a.env);
    const auto graph = a.graph.empty() ? env.truth : load_shared_graph(a.graph);
    for (const auto& t : env.tasks) mdps.emplace_back(t.id, task_mdp(env, t, graph));
  } else {
    if (!a.graph.empty()) throw Error(ErrorCode::invalid_argument, "verify --graph needs --env for the tasks");
    for (int i = 0; i < a.instances; ++i) {
      RandomMdpConfig c;
      c.max_branching = a.k;
      c.horizon = a.horizon;
      c.seed = a.seed + std::uint64_t(i);
      mdps.emplace_back("mdp" + std::to_string(i), random_mdp(c));
    }
  }
  const double tol = std::sqrt(std::log(2.0 * double(a.pairs_n) / 0.01) / (2.0 * double(a.rollouts)));
  std::vector<VerifyRow> rows;
  int greedy_ok = 0, rollout_ok = 0, rollout_n = 0;
  for (std::size_t i = 0; i < mdps.size(); ++i) {
    const auto& [name, m] = mdps[i];
    VerifyRow r;
    r.instance = name;
    r.states = int(m.graph->states().size());
    const auto q = uniform_q(m);
    const auto greedy = greedy_path(q, m);
    r.greedy_reward = path_reward(m, greedy);
    r.optimal_reward = brute_force_optimal(m).best_reward;
    r.greedy_ok = r.greedy_reward == r.optimal_reward;
    r.delta_min = r.greedy_reward == 1.0 ? min_gap(ExactValues(m), greedy).delta_min : 0.0;
    greedy_ok += r.greedy_ok ? 1 : 0;
    if (int(i) < a.pairs_n && !q.values.empty()) {
      const auto depths = min_depths(m);
      auto it = q.values.begin();
      std::advance(it, long((a.seed + i) % q.values.size()));
      const auto& [key, exact] = *it;
      double sum = 0;
      for (int k = 0; k < a.rollouts; ++k) {
        sum += rollout_uniform(m, key.first, key.second, m.horizon - depths.at(key.first),
                               (a.seed + i) * std::uint64_t(a.rollouts) + std::uint64_t(k));
      }
      r.rollout_error = std::abs(sum / a.rollouts - exact);
      r.rollout_ok = r.rollout_error <= tol;
      rollout_ok += r.rollout_ok ? 1 : 0;
      ++rollout_n;
    }
    rows.push_back(r);
  }
  const bool pass1 = greedy_ok == int(rows.size());
  const bool pass2 = rollout_ok >= rollout_n - rollout_n / 50;  // at most one miss per 50 pairs
  std::printf("%s greedy-optimality: %d/%zu\n", pass1 ? "PASS" : "FAIL", greedy_ok, rows.size());
  std::printf("%s rollout-unbiasedness: %d/%d within %.4f\n", pass2 ? "PASS" : "FAIL", rollout_ok, rollout_n, tol);
  if (!a.csv.empty()) {
    std::ostringstream os;
    os << "instance,states,greedy_reward,optimal_reward,delta_min,rollout_error,greedy_ok,rollout_ok\n";
    for (const auto& r : rows) {
      os << r.instance << ',' << r.states << ',' << r.greedy_reward << ',' << r.optimal_reward << ',' << r.delta_min
         << ',' << r.rollout_error << ',' << r.greedy_ok << ',' << r.rollout_ok << '\n';
    }
    ensure_parent(a.csv);
    write_text(a.csv, os.str());
  }
  return pass1 && pass2 ? 0 : kVerifyFailed;
}

int cmd_bench(const Args& a) {
  BenchSpec s;
  s.axis = parse_axis(a.axis);
  s.values = a.values;
  s.instances = a.instances;
  s.seeds = a.seeds;
  s.env.branching = a.k;
  s.env.depth = a.depth;
  s.env.forced_steps = a.forced;
  s.env.dag_merge_prob = a.merge_prob;
  s.strategy = a.strategy;
  s.mcts.iterations = a.iters;
  s.mcts.c = a.c;
  s.mcts.top_k = a.topk;
  s.bon_samples = a.bon;
  s.noise = a.noise;
  s.noise_mode = parse_bias_mode(a.noise_mode);
  s.delta_f = a.delta_f;
  s.training.rounds = a.rounds;
  s.training.batch = a.batch;
  check_spec(s);
  const auto rows = run_bench(s);
  ensure_parent(a.out);
  write_text(a.out, bench_csv(rows));
  const auto summary = summarize(rows);
  if (!a.summary.empty()) {
    ensure_parent(a.summary);
    write_text(a.summary, summary_csv(summary));
  }
  for (const auto& r : summary) {
    std::printf("%s=%s: success %.3f (sd %.3f) margin %.4f latency %.2f ms over %zu\n", a.axis.c_str(),
                r.value.c_str(), r.mean_success, r.std_success, r.mean_margin, r.mean_latency_ms, r.count);
  }
  return 0;
}

void report_error(std::string_view code, const std::string& message) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::cerr << "error: code=" << code << " message=" << flat << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph action planning toolkit"};
  app.set_config("--config", "", "TOML/INI file with default flag values");
  app.require_subcommand(1);
  Args a;
  int (*handler)(const Args&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Args&)) {
    auto* s = app.add_subcommand(name, help);
    s->callback([&handler, fn] { handler = fn; });
    return s;
  };

  auto* gen = sub("gen-env", "generate a seeded synthetic environment", cmd_gen_env);
  gen->add_option("--k", a.k, "branching factor")->capture_default_str();
  gen->add_option("--depth", a.depth)->capture_default_str();
  gen->add_option("--goals", a.goals, "number of tasks")->capture_default_str();
  gen->add_option("--merge-prob", a.merge_prob)->capture_default_str();
  gen->add_option("--forced-steps", a.forced, "confirmation states after every step")->capture_default_str();
  gen->add_option("--feature-dim", a.feature_dim)->capture_default_str();
  gen->add_option("--seed", a.seed)->capture_default_str();
  gen->add_option("--out", a.out)->required();

  auto* exp = sub("explore", "oracle-driven DFS exploration", cmd_explore);
  exp->add_option("--env", a.env)->required()->check(CLI::ExistingFile);
  exp->add_option("--task", a.task, "task id (all tasks when omitted)");
  exp->add_option("--k", a.k)->capture_default_str();
  exp->add_option("--budget", a.budget)->capture_default_str();
  exp->add_option("--max-depth", a.max_depth)->capture_default_str();
  exp->add_option("--p-flip", a.p_flip)->capture_default_str();
  exp->add_option("--seed", a.seed)->capture_default_str();
  exp->add_option("--out", a.out)->required();

  auto* kg = sub("build-kg", "merge trajectories into a knowledge graph", cmd_build_kg);
  kg->add_option("--trajectories", a.trajectories, "trajectory JSONL files")->required();
  kg->add_option("--graph", a.graph, "existing graph to extend");
  kg->add_option("--feature-dim", a.feature_dim, "used when there are no trajectories")->capture_default_str();
  kg->add_option("--tau-coarse", a.tau_coarse)->capture_default_str();
  kg->add_option("--tau-iou", a.tau_iou)->capture_default_str();
  kg->add_option("--out", a.out)->required();

  auto* mine = sub("mine-groups", "mine and install action groups", cmd_mine_groups);
  mine->add_option("--graph", a.graph)->required();
  mine->add_option("--delta-f", a.delta_f)->capture_default_str();
  mine->add_flag("--no-compact", a.no_compact, "keep atomic steps covered by groups");
  mine->add_option("--out", a.out, "rule list")->required();
  mine->add_option("--graph-out", a.graph_out, "updated graph (default: grouped_graph.json next to --out)");

  auto add_model_shape = [&](CLI::App* s) {
    s->add_option("--hidden", a.hidden)->capture_default_str();
    s->add_option("--dim", a.dim, "hashed feature dimension")->capture_default_str();
  };

  auto* init = sub("init-train", "preference-pair initialization", cmd_init_train);
  init->add_option("--pairs", a.pairs, "preference pairs JSONL");
  init->add_option("--env", a.env, "derive expert pairs from the env's train tasks");
  init->add_option("--graph", a.graph);
  init->add_option("--init-tasks", a.init_tasks)->capture_default_str();
  init->add_option("--train", a.train, "train tasks (default two thirds)")->capture_default_str();
  init->add_option("--pairs-out", a.pairs_out);
  init->add_option("--epochs", a.epochs)->capture_default_str();
  init->add_option("--lr", a.lr)->capture_default_str();
  init->add_option("--seed", a.seed)->capture_default_str();
  add_model_shape(init);
  init->add_option("--out", a.out)->required();

  auto* refine = sub("refine-train", "soft-label refinement on Bellman targets", cmd_refine_train);
  refine->add_option("--model", a.model)->required();
  refine->add_option("--samples", a.samples)->required();
  refine->add_option("--epochs", a.epochs)->capture_default_str();
  refine->add_option("--lr", a.lr)->capture_default_str();
  refine->add_option("--seed", a.seed)->capture_default_str();
  refine->add_option("--out", a.out)->required();

  auto* self = sub("self-train", "iterative search and refinement", cmd_self_train);
  self->add_option("--env", a.env)->required();
  self->add_option("--graph", a.graph, "graph to search (default: the env's ground truth)");
  self->add_option("--model", a.model, "initial model (default: initialize from expert pairs)");
  self->add_option("--rounds", a.rounds)->capture_default_str();
  self->add_option("--batch", a.batch)->capture_default_str();
  self->add_option("--iters", a.iters)->capture_default_str();
  self->add_option("--c", a.c)->capture_default_str();
  self->add_option("--topk", a.topk)->capture_default_str();
  self->add_option("--init-tasks", a.init_tasks)->capture_default_str();
  self->add_option("--train", a.train, "train tasks (default two thirds)")->capture_default_str();
  self->add_option("--seed", a.seed)->capture_default_str();
  add_model_shape(self);
  self->add_option("--out-dir", a.out_dir)->required();

  auto* ext = sub("extract", "plan extraction", cmd_extract);
  ext->add_option("--env", a.env)->required();
  ext->add_option("--graph", a.graph);
  ext->add_option("--task", a.task, "task id (default: the first task)");
  ext->add_option("--model", a.model, "learned scorer (default: exact oracle)");
  ext->add_option("--noise", a.noise, "bias on the exact oracle")->capture_default_str();
  ext->add_option("--noise-mode", a.noise_mode)->capture_default_str();
  ext->add_option("--strategy", a.strategy)->check(CLI::IsMember({"mcts", "greedy", "bon"}))->capture_default_str();
  ext->add_option("--iters", a.iters)->capture_default_str();
  ext->add_option("--c", a.c)->capture_default_str();
  ext->add_option("--topk", a.topk)->capture_default_str();
  ext->add_option("--bon-samples", a.bon)->capture_default_str();
  ext->add_option("--seed", a.seed)->capture_default_str();
  ext->add_option("--samples-out", a.samples, "Bellman-target samples from the search tree (mcts only)");
  ext->add_option("--out", a.out)->required();

  auto* ver = sub("verify", "greedy-optimality and rollout checks", cmd_verify);
  ver->add_option("--env", a.env, "check the env's tasks instead of random MDPs");
  ver->add_option("--graph", a.graph);
  ver->add_option("--instances", a.instances)->capture_default_str();
  ver->add_option("--k", a.k, "max branching of random MDPs")->capture_default_str();
  ver->add_option("--horizon", a.horizon)->capture_default_str();
  ver->add_option("--rollouts", a.rollouts)->capture_default_str();
  ver->add_option("--pairs", a.pairs_n, "instances checked by rollouts")->capture_default_str();
  ver->add_option("--seed", a.seed)->capture_default_str();
  ver->add_option("--csv", a.csv, "per-instance report");

  auto* bench = sub("bench", "ablation sweep", cmd_bench);
  bench->add_option("--axis", a.axis)->capture_default_str();
  bench->add_option("--values", a.values)->delimiter(',')->required();
  bench->add_option("--instances", a.instances)->capture_default_str();
  bench->add_option("--seeds", a.seeds)->delimiter(',');
  bench->add_option("--k", a.k)->capture_default_str();
  bench->add_option("--depth", a.depth)->capture_default_str();
  bench->add_option("--forced-steps", a.forced)->capture_default_str();
  bench->add_option("--merge-prob", a.merge_prob)->capture_default_str();
  bench->add_option("--strategy", a.strategy)->capture_default_str();
  bench->add_option("--iters", a.iters)->capture_default_str();
  bench->add_option("--c", a.c)->capture_default_str();
  bench->add_option("--topk", a.topk)->capture_default_str();
  bench->add_option("--bon-samples", a.bon)->capture_default_str();
  bench->add_option("--noise", a.noise)->capture_default_str();
  bench->add_option("--noise-mode", a.noise_mode)->capture_default_str();
  bench->add_option("--delta-f", a.delta_f)->capture_default_str();
  bench->add_option("--rounds", a.rounds, "model_width axis")->capture_default_str();
  bench->add_option("--batch", a.batch, "model_width axis")->capture_default_str();
  bench->add_option("--out", a.out)->required();
  bench->add_option("--summary", a.summary, "per-value summary CSV");

  // Defaults that differ between subcommands.
  bench->preparse_callback([&](std::size_t) {
    a.instances = 10;
    a.noise = 0.1;
    a.rounds = 1;
    a.batch = 4;
  });
  ver->preparse_callback([&](std::size_t) { a.k = 5; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(error_code_name(ErrorCode::invalid_argument), e.what());
    return static_cast<int>(ErrorCode::invalid_argument);
  }
  try {
    return handler(a);
  } catch (const Error& e) {
    report_error(error_code_name(e.code()), e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    report_error(error_code_name(ErrorCode::invalid_argument), e.what());
    return static_cast<int>(ErrorCode::invalid_argument);
  }
}
