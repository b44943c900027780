#include "eam/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "eam/groups.hpp"
#include "eam/scorer.hpp"

namespace eam {

BenchAxis parse_axis(const std::string& name) {
  if (name == "strategy") return BenchAxis::strategy;
  if (name == "iterations") return BenchAxis::iterations;
  if (name == "exploration_c") return BenchAxis::exploration_c;
  if (name == "model_width") return BenchAxis::model_width;
  if (name == "action_groups") return BenchAxis::action_groups;
  if (name == "bias") return BenchAxis::bias;
  throw Error(ErrorCode::invalid_argument, "unknown bench axis " + name);
}

std::string to_string(BenchAxis axis) {
  switch (axis) {
    case BenchAxis::strategy: return "strategy";
    case BenchAxis::iterations: return "iterations";
    case BenchAxis::exploration_c: return "exploration_c";
    case BenchAxis::model_width: return "model_width";
    case BenchAxis::action_groups: return "action_groups";
    case BenchAxis::bias: return "bias";
  }
  return "?";
}

namespace {

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "not a number: " + text);
  return v;
}

int parse_int(const std::string& text) {
  const double v = parse_number(text);
  if (v != std::floor(v)) throw Error(ErrorCode::invalid_argument, "not an integer: " + text);
  return static_cast<int>(v);
}

void check_strategy(const std::string& s) {
  if (s != "greedy" && s != "bon" && s != "mcts") throw Error(ErrorCode::invalid_argument, "unknown strategy " + s);
}

}  // namespace

void check_spec(const BenchSpec& spec) {
  if (spec.values.empty()) throw Error(ErrorCode::invalid_argument, "bench needs at least one axis value");
  if (spec.instances < 1) throw Error(ErrorCode::invalid_argument, "bench needs at least one instance");
  if (spec.seeds.empty()) throw Error(ErrorCode::invalid_argument, "bench needs at least one seed");
  check_config(spec.env);
  check_strategy(spec.strategy);
  for (const auto& v : spec.values) {
    switch (spec.axis) {
      case BenchAxis::strategy: check_strategy(v); break;
      case BenchAxis::iterations:
        if (parse_int(v) < 1) throw Error(ErrorCode::invalid_argument, "iterations must be >= 1");
        break;
      case BenchAxis::exploration_c:
        if (parse_number(v) < 0) throw Error(ErrorCode::invalid_argument, "c must be >= 0");
        break;
      case BenchAxis::model_width:
        if (parse_int(v) < 1) throw Error(ErrorCode::invalid_argument, "model width must be >= 1");
        break;
      case BenchAxis::action_groups:
        if (v != "on" && v != "off") throw Error(ErrorCode::invalid_argument, "action_groups values are on|off");
        break;
      case BenchAxis::bias:
        if (parse_number(v) < 0) throw Error(ErrorCode::invalid_argument, "bias must be >= 0");
        break;
    }
  }
}

Path extract_with(const std::string& strategy, const KgMdp& m, const QFunction& qf, const MctsConfig& mcts,
                  int bon_samples) {
  check_strategy(strategy);
  if (strategy == "greedy") return greedy_extract(m, qf);
  std::vector<RankedPath> top;
  if (strategy == "bon") {
    top = best_of_n(m, qf, bon_samples, 1, mcts.seed);
  } else {
    top = extract_top_k(run_mcts(m, qf, mcts), 1);
  }
  if (top.empty()) return Path{{m.root}, {}};
  return top.front().path;
}

KnowledgeGraph with_action_groups(const KnowledgeGraph& g, std::size_t delta_f, bool compact) {
  KnowledgeGraph out = g;
  install_groups(out, mine_groups(path_corpus(g), delta_f));
  if (compact) compact_groups(out);
  return out;
}

std::vector<BenchRow> run_bench(const BenchSpec& spec) {
  check_spec(spec);
  std::vector<BenchRow> rows;
  const std::string axis = to_string(spec.axis);
  for (const auto& value : spec.values) {
    for (int inst = 0; inst < spec.instances; ++inst) {
      for (const auto seed : spec.seeds) {
        SynthEnvConfig ec = spec.env;
        ec.seed = derive_seed(seed, static_cast<std::uint64_t>(inst));
        const SynthEnv env = generate_env(ec);
        const Task& task = env.tasks.front();

        std::string strategy = spec.strategy;
        MctsConfig mcts = spec.mcts;
        mcts.seed = derive_seed(ec.seed, 11);
        double noise = spec.noise;
        bool groups = false;
        int width = 0;
        switch (spec.axis) {
          case BenchAxis::strategy: strategy = value; break;
          case BenchAxis::iterations: mcts.iterations = parse_int(value); break;
          case BenchAxis::exploration_c: mcts.c = parse_number(value); break;
          case BenchAxis::model_width: width = parse_int(value); break;
          case BenchAxis::action_groups: groups = value == "on"; break;
          case BenchAxis::bias: noise = parse_number(value); break;
        }

        std::shared_ptr<const KnowledgeGraph> graph = env.truth;
        if (groups) graph = std::make_shared<const KnowledgeGraph>(with_action_groups(*env.truth, spec.delta_f));
        const KgMdp m = task_mdp(env, task, graph);

        std::unique_ptr<QFunction> qf;
        if (width > 0) {
          PipelineConfig t = spec.training;
          t.hidden = width;
          t.seed = derive_seed(ec.seed, 13);
          auto trained = run_pipeline(t, env, graph, env.tasks, {});
          qf = std::make_unique<ScorerQ>(std::make_shared<const QScorer>(trained.models.back()));
        } else {
          qf = std::make_unique<NoisyOracleQ>(m, noise, spec.noise_mode, derive_seed(ec.seed, 17));
        }

        const auto start = std::chrono::steady_clock::now();
        const Path p = extract_with(strategy, m, *qf, mcts, spec.bon_samples);
        const auto stop = std::chrono::steady_clock::now();

        BenchRow row;
        row.axis = axis;
        row.value = value;
        row.instance = inst;
        row.seed = seed;
        row.success = path_reward(m, p);
        row.margin = margin_metric(*qf, m, reference_path(m, task).value());
        row.latency_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows) {
  std::vector<BenchSummary> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, fresh] = index.try_emplace(r.value, out.size());
    if (fresh) out.push_back(BenchSummary{r.value});
    auto& s = out[it->second];
    s.count += 1;
    s.mean_success += r.success;
    s.std_success += r.success * r.success;
    s.mean_latency_ms += r.latency_ms;
    s.mean_margin += r.margin;
  }
  for (auto& s : out) {
    const double n = static_cast<double>(s.count);
    s.mean_success /= n;
    s.std_success = std::sqrt(std::max(0.0, s.std_success / n - s.mean_success * s.mean_success));
    s.mean_latency_ms /= n;
    s.mean_margin /= n;
  }
  return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "axis,value,instance,seed,success,margin,latency_ms,schema_version\n";
  for (const auto& r : rows) {
    out << r.axis << ',' << r.value << ',' << r.instance << ',' << r.seed << ',' << r.success << ',' << r.margin << ','
        << r.latency_ms << ',' << kSchemaVersion << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<BenchSummary>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "value,count,mean_success,std_success,mean_latency_ms,mean_margin\n";
  for (const auto& r : rows) {
    out << r.value << ',' << r.count << ',' << r.mean_success << ',' << r.std_success << ',' << r.mean_latency_ms << ','
        << r.mean_margin << '\n';
  }
  return out.str();
}

}  // namespace eam
