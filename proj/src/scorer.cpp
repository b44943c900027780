#include "eam/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace eam {

namespace {

// logit(1 - 1e-6)
const double kLogitBound = std::log((1.0 - kProbFloor) / kProbFloor);

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

}  // namespace

double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 || c == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

SparseVector FeatureEncoder::encode_sparse(const QContext& ctx, const ScoredAction& action) const {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "encoder dim must be >= 1");
  std::map<int, double> acc;
  if (probes < 1) throw Error(ErrorCode::invalid_argument, "encoder probes must be >= 1");
  auto emit = [&](const std::string& token) {
    for (int k = 0; k < probes; ++k) {
      const std::uint64_t salt = k == 0 ? hash_seed : derive_seed(hash_seed, static_cast<std::uint64_t>(k));
      const std::uint64_t h = fnv1a64(token, salt);
      const int bucket = static_cast<int>(h % static_cast<std::uint64_t>(dim));
      acc[bucket] += (h >> 63) != 0U ? -1.0 : 1.0;
    }
  };
  const auto instr = tokenize(ctx.instruction);
  const auto act = tokenize(action.descriptor);
  if ((fields & kFieldInstruction) != 0U) {
    for (const auto& t : instr) emit("i:" + t);
  }
  if ((fields & kFieldPage) != 0U) {
    for (const auto& t : tokenize(ctx.page_descriptor)) emit("p:" + t);
  }
  if ((fields & kFieldAction) != 0U) {
    for (const auto& t : act) emit("a:" + t);
  }
  if ((fields & kFieldHistory) != 0U) {
    for (const auto& h : ctx.history) {
      for (const auto& t : tokenize(h)) emit("h:" + t);
    }
  }
  if ((fields & kFieldCross) != 0U) {
    const std::set<std::string> in_instr(instr.begin(), instr.end());
    for (const auto& t : std::set<std::string>(act.begin(), act.end())) {
      if (in_instr.contains(t)) {
        emit("x:" + t);
        emit("x:*");
      }
    }
  }
  double norm = 0;
  for (const auto& [_, v] : acc) norm += v * v;
  SparseVector out;
  if (norm == 0) return out;
  norm = std::sqrt(norm);
  for (const auto& [i, v] : acc) {
    if (v != 0.0) out.emplace_back(i, v / norm);
  }
  return out;
}

std::vector<double> FeatureEncoder::encode(const QContext& ctx, const ScoredAction& action) const {
  std::vector<double> dense(static_cast<std::size_t>(dim), 0.0);
  for (const auto& [i, v] : encode_sparse(ctx, action)) dense[static_cast<std::size_t>(i)] = v;
  return dense;
}

std::vector<std::string> field_names(unsigned fields) {
  std::vector<std::string> out;
  if ((fields & kFieldInstruction) != 0U) out.emplace_back("instruction");
  if ((fields & kFieldPage) != 0U) out.emplace_back("page");
  if ((fields & kFieldAction) != 0U) out.emplace_back("action");
  if ((fields & kFieldHistory) != 0U) out.emplace_back("history");
  if ((fields & kFieldCross) != 0U) out.emplace_back("cross");
  return out;
}

unsigned parse_fields(const std::vector<std::string>& names) {
  unsigned f = 0;
  for (const auto& n : names) {
    if (n == "instruction") f |= kFieldInstruction;
    else if (n == "page") f |= kFieldPage;
    else if (n == "action") f |= kFieldAction;
    else if (n == "history") f |= kFieldHistory;
    else if (n == "cross") f |= kFieldCross;
    else throw Error(ErrorCode::invalid_argument, "unknown encoder field " + n);
  }
  return f;
}

// ---------------------------------------------------------------------------

QScorer::QScorer(FeatureEncoder encoder, int hidden) : encoder_(encoder), hidden_(hidden) {
  if (encoder_.dim < 1 || hidden_ < 1) throw Error(ErrorCode::invalid_argument, "scorer dims must be >= 1");
  params_.assign(b2_offset() + 1, 0.0);
}

QScorer QScorer::random(FeatureEncoder encoder, int hidden, std::uint64_t seed, double scale) {
  QScorer m(encoder, hidden);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (std::size_t i = 0; i < m.w2_offset(); ++i) m.params_[i] = i < m.b1_offset() ? normal(rng) : 0.0;
  for (std::size_t i = m.w2_offset(); i < m.b2_offset(); ++i) m.params_[i] = normal(rng);
  return m;
}

void QScorer::set_parameters(std::vector<double> params) {
  if (params.size() != params_.size()) throw Error(ErrorCode::invalid_argument, "parameter count mismatch");
  params_ = std::move(params);
}

void QScorer::hidden_activations(const SparseVector& x, std::vector<double>& h) const {
  const std::size_t dim = static_cast<std::size_t>(encoder_.dim);
  h.assign(static_cast<std::size_t>(hidden_), 0.0);
  for (std::size_t j = 0; j < h.size(); ++j) {
    double a = params_[b1_offset() + j];
    const double* row = params_.data() + j * dim;
    for (const auto& [i, v] : x) a += row[i] * v;
    h[j] = std::tanh(a);
  }
}

double QScorer::logit(const SparseVector& x) const {
  std::vector<double> h;
  hidden_activations(x, h);
  double z = params_[b2_offset()];
  for (std::size_t j = 0; j < h.size(); ++j) z += params_[w2_offset() + j] * h[j];
  return z;
}

double QScorer::score(const QContext& ctx, const ScoredAction& a) const {
  return std::clamp(logistic(logit(ctx, a)), kProbFloor, 1.0 - kProbFloor);
}

void QScorer::accumulate_logit_gradient(const SparseVector& x, double scale, std::vector<double>& grad) const {
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
  std::vector<double> h;
  hidden_activations(x, h);
  const std::size_t dim = static_cast<std::size_t>(encoder_.dim);
  grad[b2_offset()] += scale;
  for (std::size_t j = 0; j < h.size(); ++j) {
    grad[w2_offset() + j] += scale * h[j];
    const double da = scale * params_[w2_offset() + j] * (1.0 - h[j] * h[j]);
    grad[b1_offset() + j] += da;
    for (const auto& [i, v] : x) grad[j * dim + static_cast<std::size_t>(i)] += da * v;
  }
}

void QScorer::sgd_step(const SparseVector& x, double dloss_dlogit, double lr) {
  std::vector<double> h;
  hidden_activations(x, h);
  const std::size_t dim = static_cast<std::size_t>(encoder_.dim);
  const double step = lr * dloss_dlogit;
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double da = step * params_[w2_offset() + j] * (1.0 - h[j] * h[j]);
    params_[w2_offset() + j] -= step * h[j];
    params_[b1_offset() + j] -= da;
    for (const auto& [i, v] : x) params_[j * dim + static_cast<std::size_t>(i)] -= da * v;
  }
  params_[b2_offset()] -= step;
}

// ---------------------------------------------------------------------------

double ranking_loss(const QScorer& model, const PreferencePair& pair) {
  const double diff = model.logit(pair.context, pair.positive) - model.logit(pair.context, pair.negative);
  return softplus(-diff);
}

namespace {

double clamped_logit(double z) { return std::clamp(z, -kLogitBound, kLogitBound); }

double bce_from_logit(double z, double y) {
  const double zc = clamped_logit(z);
  return y * softplus(-zc) + (1.0 - y) * softplus(zc);
}

double bce_dlogit(double z, double y) {
  if (z <= -kLogitBound || z >= kLogitBound) return 0.0;
  return logistic(z) - y;
}

void check_target(double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw Error(ErrorCode::invalid_argument, "training target outside [0,1]");
}

}  // namespace

double bce_loss(const QScorer& model, const TrainSample& sample) {
  check_target(sample.target);
  return bce_from_logit(model.logit(sample.context, sample.action), sample.target);
}

std::vector<double> ranking_loss_gradient(const QScorer& model, const PreferencePair& pair) {
  const auto& enc = model.encoder();
  const auto xp = enc.encode_sparse(pair.context, pair.positive);
  const auto xn = enc.encode_sparse(pair.context, pair.negative);
  const double diff = model.logit(xp) - model.logit(xn);
  const double g = logistic(diff) - 1.0;  // dL/dz+ ; dL/dz- = -g
  std::vector<double> grad(model.parameter_count(), 0.0);
  model.accumulate_logit_gradient(xp, g, grad);
  model.accumulate_logit_gradient(xn, -g, grad);
  return grad;
}

std::vector<double> bce_loss_gradient(const QScorer& model, const TrainSample& sample) {
  check_target(sample.target);
  const auto x = model.encoder().encode_sparse(sample.context, sample.action);
  std::vector<double> grad(model.parameter_count(), 0.0);
  model.accumulate_logit_gradient(x, bce_dlogit(model.logit(x), sample.target), grad);
  return grad;
}

double mean_ranking_loss(const QScorer& model, const std::vector<PreferencePair>& pairs) {
  if (pairs.empty()) return 0.0;
  double s = 0;
  for (const auto& p : pairs) s += ranking_loss(model, p);
  return s / static_cast<double>(pairs.size());
}

double mean_bce_loss(const QScorer& model, const std::vector<TrainSample>& samples) {
  if (samples.empty()) return 0.0;
  double s = 0;
  for (const auto& t : samples) s += bce_loss(model, t);
  return s / static_cast<double>(samples.size());
}

QContext context_for(const KnowledgeGraph& g, const std::string& instruction, const std::string& state,
                     std::span<const std::string> history_actions) {
  QContext ctx;
  ctx.instruction = instruction;
  ctx.state_id = state;
  ctx.page_descriptor = g.state(state).page_descriptor;
  for (const auto& a : history_actions) ctx.history.push_back(g.action(a).functional_descriptor);
  return ctx;
}

ScoredAction scored_action(const KnowledgeGraph& g, const std::string& action_id) {
  return ScoredAction{action_id, g.action(action_id).functional_descriptor};
}

std::vector<PreferencePair> build_preference_pairs(const std::vector<ExpertPath>& expert_paths,
                                                   const KnowledgeGraph& g, std::uint64_t seed) {
  std::vector<PreferencePair> pairs;
  std::uint64_t counter = 0;
  for (const auto& ep : expert_paths) {
    const auto& p = ep.path;
    for (std::size_t t = 0; t < p.actions.size(); ++t) {
      const auto actions = g.available_actions(p.states[t]);
      std::vector<std::string> negatives;
      for (const auto& a : actions) {
        if (a != p.actions[t]) negatives.push_back(a);
      }
      if (negatives.empty()) continue;
      std::mt19937_64 rng(derive_seed(seed, counter++));
      std::uniform_int_distribution<std::size_t> pick(0, negatives.size() - 1);
      PreferencePair pair;
      pair.context = context_for(g, ep.instruction, p.states[t], std::span(p.actions).first(t));
      pair.positive = scored_action(g, p.actions[t]);
      pair.negative = scored_action(g, negatives[pick(rng)]);
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

LossTrace init_train(QScorer& model, const std::vector<PreferencePair>& pairs, int epochs, double lr,
                     std::uint64_t seed) {
  if (pairs.empty()) throw Error(ErrorCode::invalid_argument, "init_train needs at least one pair");
  if (epochs < 0 || lr < 0) throw Error(ErrorCode::invalid_argument, "epochs and lr must be >= 0");
  const auto& enc = model.encoder();
  std::vector<std::pair<SparseVector, SparseVector>> xs;
  for (const auto& p : pairs) xs.emplace_back(enc.encode_sparse(p.context, p.positive), enc.encode_sparse(p.context, p.negative));
  auto mean_loss = [&] {
    double s = 0;
    for (const auto& [xp, xn] : xs) s += softplus(-(model.logit(xp) - model.logit(xn)));
    return s / static_cast<double>(xs.size());
  };
  LossTrace trace{mean_loss()};
  std::mt19937_64 rng(seed);
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i : shuffled(xs.size(), rng)) {
      const auto& [xp, xn] = xs[i];
      const double g = logistic(model.logit(xp) - model.logit(xn)) - 1.0;
      // Both gradients at the same parameters: accumulate, then apply.
      std::vector<double> grad(model.parameter_count(), 0.0);
      model.accumulate_logit_gradient(xp, g, grad);
      model.accumulate_logit_gradient(xn, -g, grad);
      auto params = model.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
      model.set_parameters(std::move(params));
    }
    trace.push_back(mean_loss());
  }
  return trace;
}

LossTrace refine_train(QScorer& model, const std::vector<TrainSample>& samples, int epochs, double lr,
                       std::uint64_t seed) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "refine_train needs at least one sample");
  if (epochs < 0 || lr < 0) throw Error(ErrorCode::invalid_argument, "epochs and lr must be >= 0");
  for (const auto& s : samples) check_target(s.target);
  const auto& enc = model.encoder();
  std::vector<SparseVector> xs;
  for (const auto& s : samples) xs.push_back(enc.encode_sparse(s.context, s.action));
  auto mean_loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += bce_from_logit(model.logit(xs[i]), samples[i].target);
    return s / static_cast<double>(xs.size());
  };
  LossTrace trace{mean_loss()};
  std::mt19937_64 rng(seed);
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i : shuffled(xs.size(), rng)) {
      model.sgd_step(xs[i], bce_dlogit(model.logit(xs[i]), samples[i].target), lr);
    }
    trace.push_back(mean_loss());
  }
  return trace;
}

PinskerResult pinsker_check(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw Error(ErrorCode::invalid_argument, "pinsker_check needs equally sized, non-empty inputs");
  }
  double sq = 0, risk_model = 0, risk_truth = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double q = predictions[i];
    const double y = truths[i];
    sq += (q - y) * (q - y);
    risk_model += -xlogy(y, q) - xlogy(1.0 - y, 1.0 - q);
    risk_truth += -xlogy(y, y) - xlogy(1.0 - y, 1.0 - y);
  }
  const double n = static_cast<double>(predictions.size());
  PinskerResult r;
  r.mse = sq / n;
  r.excess_risk = (risk_model - risk_truth) / n;
  r.holds = r.mse <= 0.5 * r.excess_risk + 1e-12;
  return r;
}

PinskerResult pinsker_check(const QScorer& model, const std::vector<EvalPoint>& eval_set) {
  std::vector<double> pred, truth;
  for (const auto& e : eval_set) {
    pred.push_back(model.score(e.context, e.action));
    truth.push_back(e.truth);
  }
  return pinsker_check(pred, truth);
}

double ScorerQ::evaluate(const KgMdp& m, const std::string& state, const std::string& action,
                         std::span<const std::string> history) const {
  return model_->score(context_for(*m.graph, m.instruction, state, history), scored_action(*m.graph, action));
}

}  // namespace eam
