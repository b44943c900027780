#pragma once

// Ablation sweeps over synthetic environments, one CSV row per cell.

#include <cstdint>
#include <string>
#include <vector>

#include "eam/env.hpp"
#include "eam/mcts.hpp"
#include "eam/pipeline.hpp"
#include "eam/qfunction.hpp"

namespace eam {

enum class BenchAxis { strategy, iterations, exploration_c, model_width, action_groups, bias };

BenchAxis parse_axis(const std::string& name);
std::string to_string(BenchAxis axis);

struct BenchSpec {
  BenchAxis axis = BenchAxis::strategy;
  std::vector<std::string> values;
  int instances = 10;
  std::vector<std::uint64_t> seeds{0};
  SynthEnvConfig env;
  std::string strategy = "mcts";  // used when the axis is not strategy
  MctsConfig mcts;
  int bon_samples = 10;
  double noise = 0.1;  // bias magnitude of the noisy oracle
  BiasMode noise_mode = BiasMode::random;
  std::size_t delta_f = 3;  // group mining threshold
  PipelineConfig training;  // model_width axis
};

void check_spec(const BenchSpec& spec);

struct BenchRow {
  std::string axis;
  std::string value;
  int instance = 0;
  std::uint64_t seed = 0;
  double success = 0.0;
  double margin = 0.0;
  double latency_ms = 0.0;
};

struct BenchSummary {
  std::string value;
  std::size_t count = 0;
  double mean_success = 0.0;
  double std_success = 0.0;
  double mean_latency_ms = 0.0;
  double mean_margin = 0.0;
};

/// Rows ordered by (axis value, instance, seed).
std::vector<BenchRow> run_bench(const BenchSpec& spec);
std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows);

std::string bench_csv(const std::vector<BenchRow>& rows);
std::string summary_csv(const std::vector<BenchSummary>& rows);

/// Extraction of a single top path with the named strategy (greedy|bon|mcts).
Path extract_with(const std::string& strategy, const KgMdp& m, const QFunction& qf, const MctsConfig& mcts,
                  int bon_samples);

/// Mines groups from the graph's own path corpus, installs them and, when
/// compact is set, drops the atomic steps the groups make redundant.
KnowledgeGraph with_action_groups(const KnowledgeGraph& g, std::size_t delta_f, bool compact = true);

}  // namespace eam
