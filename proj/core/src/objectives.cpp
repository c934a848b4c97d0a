#include "salm/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "salm/error.hpp"

namespace salm {

namespace {

struct Evaluated {
  ForwardResult fwd;
  Matrix probs;  // softmax rows at the response positions
  double log_prob = 0.0;
};

Evaluated evaluate(const ModelConfig& config, const Parameters& params,
                   std::span<const TokenId> context, std::span<const TokenId> response) {
  if (response.empty()) throw LengthError("response must not be empty");
  if (response.back() != Vocabulary::kEos) throw LengthError("response must end with EOS");
  Evaluated e;
  e.fwd = forward(config, params, teacher_forced_input(context, response));
  const auto first = static_cast<Eigen::Index>(context.size());
  const auto m = static_cast<Eigen::Index>(response.size());
  const Matrix logp = log_softmax_rows(e.fwd.logits.middleRows(first, m));
  e.probs = logp.array().exp();
  for (Eigen::Index j = 0; j < m; ++j) e.log_prob += logp(j, response[static_cast<std::size_t>(j)]);
  return e;
}

/// grads += coeff * d(log_prob)/d(params)
void accumulate(const ModelConfig& config, const Parameters& params, const Evaluated& e,
                std::span<const TokenId> context, std::span<const TokenId> response,
                double coeff, Parameters& grads) {
  Matrix dlogits = Matrix::Zero(e.fwd.logits.rows(), e.fwd.logits.cols());
  const auto first = static_cast<Eigen::Index>(context.size());
  for (Eigen::Index j = 0; j < e.probs.rows(); ++j) {
    auto row = dlogits.row(first + j);
    row = -coeff * e.probs.row(j);
    row(response[static_cast<std::size_t>(j)]) += coeff;
  }
  backward(config, params, e.fwd.trace, dlogits, grads);
}

double normalizer(std::span<const TokenId> response, const ObjectiveConfig& objective) {
  return objective.length_normalize_score ? static_cast<double>(response.size()) : 1.0;
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!std::isfinite(margin) || margin < 0.0) throw ConfigError("margin must be finite and >= 0");
  if (!std::isfinite(lambda_weight) || lambda_weight < 0.0)
    throw ConfigError("lambda_weight must be finite and >= 0");
}

double lm_loss(const ModelConfig& config, const Parameters& params,
               std::span<const TokenId> context, std::span<const TokenId> response) {
  return -sequence_log_prob(config, params, context, response) /
         static_cast<double>(response.size());
}

double score(const ModelConfig& config, const Parameters& params,
             std::span<const TokenId> context, std::span<const TokenId> response,
             const ObjectiveConfig& objective) {
  return sequence_log_prob(config, params, context, response) / normalizer(response, objective);
}

HingePair hinge_terms(const TripleScores& s, double margin) {
  return {std::max(0.0, margin + s.negative_context - s.positive),
          std::max(0.0, margin + s.negative_speaker - s.positive)};
}

TripleScores score_triple(const ModelConfig& config, const Parameters& params,
                          const TrainingTriple& t, const ObjectiveConfig& objective) {
  return {score(config, params, t.context.token_ids, t.response, objective),
          score(config, params, t.context.token_ids, t.neg_response, objective),
          score(config, params, t.neg_context.token_ids, t.response, objective)};
}

double contrastive_loss(const ModelConfig& config, const Parameters& params,
                        const TrainingTriple& triple, const ObjectiveConfig& objective,
                        HingePair* terms) {
  const HingePair h = hinge_terms(score_triple(config, params, triple, objective), objective.margin);
  if (terms) *terms = h;
  return h.sum();
}

LossBreakdown total_loss(const ModelConfig& config, const Parameters& params,
                         const TrainingTriple& triple, const ObjectiveConfig& objective) {
  LossBreakdown out;
  HingePair h;
  out.lm = lm_loss(config, params, triple.context.token_ids, triple.response);
  out.contrastive = contrastive_loss(config, params, triple, objective, &h);
  out.hinge_context = h.context;
  out.hinge_speaker = h.speaker;
  out.total = out.lm + objective.lambda_weight * out.contrastive;
  return out;
}

LossBreakdown total_loss_with_gradient(const ModelConfig& config, const Parameters& params,
                                       const TrainingTriple& t, const ObjectiveConfig& objective,
                                       double weight, Parameters& grads, TripleScores* scores) {
  const auto& ctx = t.context.token_ids;
  const auto& neg_ctx = t.neg_context.token_ids;
  const Evaluated pos = evaluate(config, params, ctx, t.response);
  const Evaluated neg_r = evaluate(config, params, ctx, t.neg_response);
  const Evaluated neg_s = evaluate(config, params, neg_ctx, t.response);

  const double m = static_cast<double>(t.response.size());
  const double norm_pos = normalizer(t.response, objective);
  const double norm_neg = normalizer(t.neg_response, objective);
  const TripleScores s{pos.log_prob / norm_pos, neg_r.log_prob / norm_neg,
                       neg_s.log_prob / norm_pos};
  if (scores) *scores = s;

  LossBreakdown out;
  const HingePair h = hinge_terms(s, objective.margin);
  out.lm = -pos.log_prob / m;
  out.contrastive = h.sum();
  out.hinge_context = h.context;
  out.hinge_speaker = h.speaker;
  out.total = out.lm + objective.lambda_weight * out.contrastive;

  if (objective.lambda_weight == 0.0) {
    accumulate(config, params, pos, ctx, t.response, -weight / m, grads);
    return out;
  }
  const bool active_ctx = objective.margin + s.negative_context - s.positive >= 0.0;
  const bool active_spk = objective.margin + s.negative_speaker - s.positive >= 0.0;
  const double lw = weight * objective.lambda_weight;
  const double active = (active_ctx ? 1.0 : 0.0) + (active_spk ? 1.0 : 0.0);
  accumulate(config, params, pos, ctx, t.response, -weight / m - lw * active / norm_pos, grads);
  if (active_ctx) accumulate(config, params, neg_r, ctx, t.neg_response, lw / norm_neg, grads);
  if (active_spk) accumulate(config, params, neg_s, neg_ctx, t.response, lw / norm_pos, grads);
  return out;
}

double lm_loss_with_gradient(const ModelConfig& config, const Parameters& params,
                             std::span<const TokenId> context,
                             std::span<const TokenId> response, double weight, Parameters& grads) {
  const Evaluated pos = evaluate(config, params, context, response);
  const double m = static_cast<double>(response.size());
  accumulate(config, params, pos, context, response, -weight / m, grads);
  return -pos.log_prob / m;
}

}  // namespace salm
