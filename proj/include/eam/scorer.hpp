#pragma once

// Lightweight learnable Q-model: hashed bag-of-tokens features feeding a
// one-hidden-layer scorer whose logistic output is a success probability.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eam/graph.hpp"
#include "eam/mdp.hpp"
#include "eam/qfunction.hpp"

namespace eam {

inline constexpr double kProbFloor = 1e-6;

struct QContext {
  std::string instruction;
  std::string state_id;
  std::string page_descriptor;
  std::vector<std::string> history;  // functional descriptors of executed actions

  bool operator==(const QContext&) const = default;
};

struct ScoredAction {
  std::string action_id;
  std::string descriptor;

  bool operator==(const ScoredAction&) const = default;
};

enum EncoderField : unsigned {
  kFieldInstruction = 1U << 0,
  kFieldPage = 1U << 1,
  kFieldAction = 1U << 2,
  kFieldHistory = 1U << 3,
  kFieldCross = 1U << 4,  // tokens shared by instruction and action
  kAllFields = 0x1FU,
};

std::vector<std::string> tokenize(const std::string& text);

using SparseVector = std::vector<std::pair<int, double>>;

struct FeatureEncoder {
  int dim = 256;
  std::uint64_t hash_seed = 0;
  unsigned fields = kAllFields;
  int probes = 4;  // buckets per token, each with its own salt

  /// Dense, L2-normalized (all zeros when no token is emitted).
  std::vector<double> encode(const QContext& ctx, const ScoredAction& action) const;
  SparseVector encode_sparse(const QContext& ctx, const ScoredAction& action) const;

  bool operator==(const FeatureEncoder&) const = default;
};

std::vector<std::string> field_names(unsigned fields);
unsigned parse_fields(const std::vector<std::string>& names);

class QScorer {
 public:
  /// Zero parameters: every score is 0.5.
  QScorer(FeatureEncoder encoder, int hidden);
  /// Small Gaussian weights from a seeded generator.
  static QScorer random(FeatureEncoder encoder, int hidden, std::uint64_t seed, double scale = 0.1);

  const FeatureEncoder& encoder() const noexcept { return encoder_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const std::vector<double>& parameters() const noexcept { return params_; }
  void set_parameters(std::vector<double> params);

  double logit(const SparseVector& x) const;
  double logit(const QContext& ctx, const ScoredAction& a) const { return logit(encoder_.encode_sparse(ctx, a)); }
  /// logistic(logit) clamped to [1e-6, 1 - 1e-6].
  double score(const QContext& ctx, const ScoredAction& a) const;

  /// Adds scale * d logit / d theta into grad (dense, parameter layout order).
  void accumulate_logit_gradient(const SparseVector& x, double scale, std::vector<double>& grad) const;
  /// theta -= lr * dloss/dlogit * dlogit/dtheta, touching only active inputs.
  void sgd_step(const SparseVector& x, double dloss_dlogit, double lr);

  bool operator==(const QScorer&) const = default;

 private:
  FeatureEncoder encoder_;
  int hidden_;
  std::vector<double> params_;  // [W1 (hidden x dim) | b1 | w2 | b2]

  std::size_t b1_offset() const { return static_cast<std::size_t>(hidden_) * static_cast<std::size_t>(encoder_.dim); }
  std::size_t w2_offset() const { return b1_offset() + static_cast<std::size_t>(hidden_); }
  std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(hidden_); }
  void hidden_activations(const SparseVector& x, std::vector<double>& h) const;
};

struct PreferencePair {
  QContext context;
  ScoredAction positive;
  ScoredAction negative;
};

struct TrainSample {
  QContext context;
  ScoredAction action;
  double target = 0.0;
};

struct ExpertPath {
  std::string instruction;
  Path path;
};

double logistic(double z) noexcept;
double softplus(double z) noexcept;

/// -log sigma(z+ - z-) on raw logits.
double ranking_loss(const QScorer& model, const PreferencePair& pair);
/// Soft-label cross-entropy on the clamped logit.
double bce_loss(const QScorer& model, const TrainSample& sample);
std::vector<double> ranking_loss_gradient(const QScorer& model, const PreferencePair& pair);
std::vector<double> bce_loss_gradient(const QScorer& model, const TrainSample& sample);

QContext context_for(const KnowledgeGraph& g, const std::string& instruction, const std::string& state,
                     std::span<const std::string> history_actions);
ScoredAction scored_action(const KnowledgeGraph& g, const std::string& action_id);

/// One pair per expert step with at least two available actions; the
/// negative is drawn uniformly from the non-expert actions.
std::vector<PreferencePair> build_preference_pairs(const std::vector<ExpertPath>& expert_paths,
                                                   const KnowledgeGraph& g, std::uint64_t seed);

using LossTrace = std::vector<double>;  // [initial, after epoch 1, ...]

LossTrace init_train(QScorer& model, const std::vector<PreferencePair>& pairs, int epochs, double lr,
                     std::uint64_t seed);
LossTrace refine_train(QScorer& model, const std::vector<TrainSample>& samples, int epochs, double lr,
                       std::uint64_t seed);

double mean_ranking_loss(const QScorer& model, const std::vector<PreferencePair>& pairs);
double mean_bce_loss(const QScorer& model, const std::vector<TrainSample>& samples);

struct PinskerResult {
  double mse = 0.0;
  double excess_risk = 0.0;
  bool holds = true;
};

/// E[(Q - Q†)^2] against 1/2 (R(Q) - R(Q†)) under log-loss.
PinskerResult pinsker_check(std::span<const double> predictions, std::span<const double> truths);

struct EvalPoint {
  QContext context;
  ScoredAction action;
  double truth = 0.0;  // Q†
};
PinskerResult pinsker_check(const QScorer& model, const std::vector<EvalPoint>& eval_set);

/// Learned scorer as a planner value function.
class ScorerQ : public QFunction {
 public:
  explicit ScorerQ(std::shared_ptr<const QScorer> model) : model_(std::move(model)) {}
  double evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                  std::span<const std::string> history) const override;

 private:
  std::shared_ptr<const QScorer> model_;
};

}  // namespace eam
