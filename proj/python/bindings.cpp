#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
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

namespace py = pybind11;
using namespace eam;

namespace {

using GraphPtr = std::shared_ptr<const KnowledgeGraph>;

KgMdp mdp_for(const SynthEnv& env, const std::string& task, const GraphPtr& graph) {
  return task_mdp(env, task.empty() ? env.tasks.front() : env.task(task), graph);
}

py::dict path_dict(const Path& p) {
  py::dict d;
  d["states"] = p.states;
  d["actions"] = p.actions;
  return d;
}

py::list ranked_list(const std::vector<RankedPath>& ranked) {
  py::list out;
  for (const auto& r : ranked) {
    py::dict d = path_dict(r.path);
    d["node_q"] = r.node_q;
    d["mean_q"] = r.mean_q;
    d["score"] = r.score;
    d["visits"] = r.visits;
    out.append(d);
  }
  return out;
}

std::unique_ptr<QFunction> make_qf(const KgMdp& m, const std::shared_ptr<QScorer>& model, double noise,
                                   const std::string& mode, std::uint64_t seed) {
  if (model) return std::make_unique<ScorerQ>(model);
  if (noise > 0.0) {
    return std::make_unique<NoisyOracleQ>(m, noise, mode == "adversarial" ? BiasMode::adversarial : BiasMode::random,
                                          seed);
  }
  return std::make_unique<ExactOracleQ>(m);
}

}  // namespace

PYBIND11_MODULE(_eam, mod) {
  mod.doc() = "Knowledge-graph action planning: environments, exact MDP oracles, MCTS and a learned Q-scorer";

  static py::exception<Error> eam_error(mod, "EamError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(eam_error)(std::string(e.what()));
      exc.attr("code") = std::string(error_code_name(e.code()));
      PyErr_SetObject(eam_error.ptr(), exc.ptr());
    }
  });
  mod.attr("SCHEMA_VERSION") = kSchemaVersion;

  py::class_<KnowledgeGraph, std::shared_ptr<KnowledgeGraph>>(mod, "KnowledgeGraph")
      .def(py::init<int>(), py::arg("feature_dim"))
      .def_static("load", [](const std::string& path) { return std::make_shared<KnowledgeGraph>(load_graph(path)); })
      .def_static("from_json",
                  [](const std::string& text) {
                    return std::make_shared<KnowledgeGraph>(graph_from_json(parse_json(text, "graph")));
                  })
      .def("save", [](const KnowledgeGraph& g, const std::string& path) { save_graph(path, g); })
      .def("to_json", [](const KnowledgeGraph& g) { return graph_to_json(g).dump(); })
      .def_property_readonly("feature_dim", &KnowledgeGraph::feature_dim)
      .def_property_readonly("state_ids",
                             [](const KnowledgeGraph& g) {
                               std::vector<std::string> ids;
                               for (const auto& [id, _] : g.states()) ids.push_back(id);
                               return ids;
                             })
      .def_property_readonly("action_ids",
                             [](const KnowledgeGraph& g) {
                               std::vector<std::string> ids;
                               for (const auto& [id, _] : g.actions()) ids.push_back(id);
                               return ids;
                             })
      .def("available_actions", &KnowledgeGraph::available_actions)
      .def("target_of", &KnowledgeGraph::target_of)
      .def("is_group", [](const KnowledgeGraph& g, const std::string& a) { return g.action(a).kind == ActionKind::group; })
      .def("validate", [](const KnowledgeGraph& g) { return validate(g); })
      .def("__eq__", [](const KnowledgeGraph& a, const KnowledgeGraph& b) { return a == b; });

  py::class_<Task>(mod, "Task")
      .def_readonly("id", &Task::id)
      .def_readonly("instruction", &Task::instruction)
      .def_readonly("goals", &Task::goals)
      .def_property_readonly("optimal", [](const Task& t) { return path_dict(t.optimal); });

  py::class_<SynthEnv>(mod, "SynthEnv")
      .def_static(
          "generate",
          [](int k, int depth, int goals, double merge_prob, int forced_steps, std::uint64_t seed) {
            SynthEnvConfig c;
            c.branching = k;
            c.depth = depth;
            c.goal_count = goals;
            c.dag_merge_prob = merge_prob;
            c.forced_steps = forced_steps;
            c.seed = seed;
            return generate_env(c);
          },
          py::arg("k") = 3, py::arg("depth") = 3, py::arg("goals") = 1, py::arg("merge_prob") = 0.0,
          py::arg("forced_steps") = 0, py::arg("seed") = 0)
      .def_static("load", &load_env)
      .def("save", [](const SynthEnv& e, const std::string& path) { save_env(path, e); })
      .def_readonly("tasks", &SynthEnv::tasks)
      .def_readonly("root", &SynthEnv::root)
      .def_readonly("horizon", &SynthEnv::horizon)
      .def_property_readonly("truth", [](const SynthEnv& e) { return std::make_shared<KnowledgeGraph>(*e.truth); })
      .def("__eq__", [](const SynthEnv& a, const SynthEnv& b) { return a == b; });

  mod.def(
      "explore",
      [](const SynthEnv& env, const std::string& task, int k, int budget, std::uint64_t seed, double p_flip) {
        ExploreConfig c;
        c.k = k;
        c.budget = budget;
        c.seed = seed;
        c.p_flip = p_flip;
        return trajectories_to_jsonl(dfs_explore(env, task.empty() ? env.tasks.front() : env.task(task), c).trajectories);
      },
      py::arg("env"), py::arg("task") = "", py::arg("k") = 3, py::arg("budget") = 1000, py::arg("seed") = 0,
      py::arg("p_flip") = 0.0, "DFS exploration; returns trajectories as JSONL text");

  mod.def(
      "build_kg",
      [](const std::string& jsonl, int feature_dim, double tau_coarse) {
        auto g = std::make_shared<KnowledgeGraph>(feature_dim);
        DedupConfig dc;
        dc.tau_coarse = tau_coarse;
        TemplateDescriptorProvider provider;
        for (const auto& t : trajectories_from_jsonl(jsonl)) merge_trajectory(*g, t, dc, provider);
        return g;
      },
      py::arg("trajectories"), py::arg("feature_dim") = 16, py::arg("tau_coarse") = 0.95);

  mod.def(
      "mine_groups",
      [](const std::vector<std::vector<std::string>>& paths, std::size_t delta_f) {
        py::list out;
        for (const auto& r : mine_groups(PathCorpus::from_paths(paths), delta_f)) {
          py::dict d;
          d["left"] = r.left;
          d["right"] = r.right;
          d["new_id"] = r.new_id;
          d["frequency"] = r.frequency;
          d["iteration"] = r.iteration;
          out.append(d);
        }
        return out;
      },
      py::arg("paths"), py::arg("delta_f") = 3);

  mod.def(
      "with_action_groups",
      [](const KnowledgeGraph& g, std::size_t delta_f, bool compact) {
        return std::make_shared<KnowledgeGraph>(with_action_groups(g, delta_f, compact));
      },
      py::arg("graph"), py::arg("delta_f") = 3, py::arg("compact") = true);

  mod.def(
      "uniform_q",
      [](const SynthEnv& env, const std::string& task, GraphPtr graph) {
        return uniform_q(mdp_for(env, task, graph)).values;
      },
      py::arg("env"), py::arg("task") = "", py::arg("graph") = nullptr);

  mod.def(
      "greedy_and_optimal",
      [](const SynthEnv& env, const std::string& task, GraphPtr graph) {
        const auto m = mdp_for(env, task, graph);
        return py::make_tuple(path_reward(m, greedy_path(uniform_q(m), m)), brute_force_optimal(m).best_reward);
      },
      py::arg("env"), py::arg("task") = "", py::arg("graph") = nullptr,
      "(reward of the greedy path over exact Q, brute-force optimal reward)");

  mod.def("simulation_budget", &simulation_budget, py::arg("k"), py::arg("c"), py::arg("delta_eff"), py::arg("horizon"),
          py::arg("delta"), py::arg("n0") = 1.0);

  py::class_<QScorer, std::shared_ptr<QScorer>>(mod, "QScorer")
      .def_static(
          "random",
          [](int dim, int hidden, std::uint64_t seed) {
            FeatureEncoder e;
            e.dim = dim;
            return std::make_shared<QScorer>(QScorer::random(e, hidden, seed));
          },
          py::arg("dim") = 256, py::arg("hidden") = 64, py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return std::make_shared<QScorer>(load_model(path)); })
      .def("save", [](const QScorer& m, const std::string& path) { save_model(path, m); })
      .def_property_readonly("parameter_count", &QScorer::parameter_count)
      .def(
          "score",
          [](const QScorer& m, const KnowledgeGraph& g, const std::string& instruction, const std::string& state,
             const std::string& action, const std::vector<std::string>& history) {
            return m.score(context_for(g, instruction, state, history), scored_action(g, action));
          },
          py::arg("graph"), py::arg("instruction"), py::arg("state"), py::arg("action"),
          py::arg("history") = std::vector<std::string>{})
      .def("__eq__", [](const QScorer& a, const QScorer& b) { return a == b; });

  mod.def(
      "extract",
      [](const SynthEnv& env, const std::string& task, const std::string& strategy, int iters, double c, int topk,
         std::uint64_t seed, GraphPtr graph, std::shared_ptr<QScorer> model, double noise, const std::string& mode) {
        const auto m = mdp_for(env, task, graph);
        const auto qf = make_qf(m, model, noise, mode, seed);
        MctsConfig mc;
        mc.iterations = iters;
        mc.c = c;
        mc.top_k = topk;
        mc.seed = seed;
        if (strategy == "mcts") return ranked_list(extract_top_k(run_mcts(m, *qf, mc), topk));
        if (strategy == "bon") return ranked_list(best_of_n(m, *qf, 10, topk, seed));
        RankedPath r;
        r.path = extract_with(strategy, m, *qf, mc, 10);
        return ranked_list({r});
      },
      py::arg("env"), py::arg("task") = "", py::arg("strategy") = "mcts", py::arg("iters") = 50, py::arg("c") = 10.0,
      py::arg("topk") = 5, py::arg("seed") = 0, py::arg("graph") = nullptr, py::arg("model") = nullptr,
      py::arg("noise") = 0.0, py::arg("noise_mode") = "random");

  mod.def(
      "is_success",
      [](const SynthEnv& env, const std::string& task, const std::vector<std::string>& states,
         const std::vector<std::string>& actions, GraphPtr graph) {
        return path_reward(mdp_for(env, task, graph), Path{states, actions}) == 1.0;
      },
      py::arg("env"), py::arg("task"), py::arg("states"), py::arg("actions"), py::arg("graph") = nullptr);

  mod.def(
      "self_train",
      [](const SynthEnv& env, int train, int rounds, int batch, int iters, double c, int hidden, std::uint64_t seed,
         GraphPtr graph) {
        PipelineConfig cfg;
        cfg.rounds = rounds;
        cfg.batch = batch;
        cfg.mcts.iterations = iters;
        cfg.mcts.c = c;
        cfg.hidden = hidden;
        cfg.seed = seed;
        const std::size_t n = std::min<std::size_t>(std::size_t(train), env.tasks.size());
        const std::vector<Task> tr(env.tasks.begin(), env.tasks.begin() + long(n));
        std::vector<Task> ev(env.tasks.begin() + long(n), env.tasks.end());
        if (ev.empty()) ev = tr;
        const auto res = run_pipeline(cfg, env, graph, tr, ev);
        py::list reports;
        for (const auto& r : res.reports) {
          py::dict d;
          d["round"] = r.round;
          d["loss"] = r.loss;
          d["success_rate"] = r.success_rate;
          d["margin"] = r.margin;
          d["samples"] = r.samples;
          reports.append(d);
        }
        return py::make_tuple(reports, std::make_shared<QScorer>(res.models.back()));
      },
      py::arg("env"), py::arg("train"), py::arg("rounds") = 4, py::arg("batch") = 20, py::arg("iters") = 50,
      py::arg("c") = 10.0, py::arg("hidden") = 64, py::arg("seed") = 0, py::arg("graph") = nullptr,
      "runs the self-training loop; returns (per-round reports, final model)");

  mod.def(
      "run_bench",
      [](const std::string& axis, const std::vector<std::string>& values, int instances,
         const std::vector<std::uint64_t>& seeds, int k, int depth, int forced_steps, double noise) {
        BenchSpec s;
        s.axis = parse_axis(axis);
        s.values = values;
        s.instances = instances;
        s.seeds = seeds;
        s.env.branching = k;
        s.env.depth = depth;
        s.env.forced_steps = forced_steps;
        s.noise = noise;
        check_spec(s);
        return bench_csv(run_bench(s));
      },
      py::arg("axis"), py::arg("values"), py::arg("instances") = 10, py::arg("seeds") = std::vector<std::uint64_t>{0},
      py::arg("k") = 3, py::arg("depth") = 3, py::arg("forced_steps") = 0, py::arg("noise") = 0.1,
      "ablation sweep; returns the CSV text");

  mod.def(
      "pinsker_check",
      [](const std::vector<double>& pred, const std::vector<double>& truth) {
        const auto r = pinsker_check(pred, truth);
        return py::make_tuple(r.mse, r.excess_risk, r.holds);
      },
      py::arg("predictions"), py::arg("truths"), "(mse, excess log-loss, mse <= excess / 2)");
}
