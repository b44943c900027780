#pragma once

// Self-training loop: initialization on expert preference pairs, then rounds
// of model-guided search, Bellman-target labelling and refinement.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eam/env.hpp"
#include "eam/mcts.hpp"
#include "eam/scorer.hpp"

namespace eam {

struct TrainParams {
  int epochs = 1;
  double lr = 0.1;
};

struct PipelineConfig {
  int rounds = 4;  // R
  int batch = 20;  // tasks searched per round
  MctsConfig mcts;
  TrainParams init{20, 0.05};
  TrainParams refine{1, 0.5};
  int init_tasks = 4;  // train tasks whose optimal paths seed the preference pairs
  int hidden = 64;
  FeatureEncoder encoder;
  std::uint64_t seed = 0;
};

void check_config(const PipelineConfig& cfg);

struct RoundReport {
  int round = 0;
  LossTrace loss;
  double success_rate = 0.0;
  double margin = 0.0;
  std::size_t samples = 0;

  bool operator==(const RoundReport&) const = default;
};

struct EvalSummary {
  double success_rate = 0.0;
  double margin = 0.0;
};

/// Mean over steps of Q(s*, a*) - max_{a != a*} Q(s*, a); single-action steps skipped.
double margin_metric(const QFunction& qf, const KgMdp& m, const Path& tau_star);

/// Top-1 MCTS extraction success and mean margin over tasks.
EvalSummary evaluate_tasks(const QFunction& qf, const SynthEnv& env, std::shared_ptr<const KnowledgeGraph> graph,
                           const std::vector<Task>& tasks, const MctsConfig& mcts);

/// Training samples from one search tree: every expanded or terminal node.
std::vector<TrainSample> samples_from_tree(const SearchTree& tree, const KgMdp& m);

struct RoundResult {
  QScorer model;
  RoundReport report;
  std::vector<TrainSample> samples;
};

RoundResult run_round(const QScorer& model, const SynthEnv& env, std::shared_ptr<const KnowledgeGraph> graph,
                      const std::vector<Task>& batch, const std::vector<Task>& eval_tasks, const PipelineConfig& cfg,
                      int round);

/// Expert pairs from the first cfg.init_tasks train tasks, then init_train.
QScorer initialize_model(const KnowledgeGraph& graph, const std::vector<Task>& train_tasks,
                         const PipelineConfig& cfg);

struct PipelineResult {
  QScorer initial;
  std::vector<QScorer> models;  // after each round
  std::vector<RoundReport> reports;
};

PipelineResult run_pipeline(const PipelineConfig& cfg, const SynthEnv& env, std::shared_ptr<const KnowledgeGraph> graph,
                            const std::vector<Task>& train_tasks, const std::vector<Task>& eval_tasks);
/// Continues from a given model instead of initializing.
PipelineResult run_pipeline(const PipelineConfig& cfg, const QScorer& initial, const SynthEnv& env,
                            std::shared_ptr<const KnowledgeGraph> graph, const std::vector<Task>& train_tasks,
                            const std::vector<Task>& eval_tasks);

std::string rounds_csv(const std::vector<RoundReport>& reports);

}  // namespace eam
