#pragma once

#include <span>

#include "salm/model.hpp"
#include "salm/sampling.hpp"

namespace salm {

struct ObjectiveConfig {
  /// Hinge margin, applied to log-domain scores (nats).
  double margin = 1.0;
  /// Weight of the contrastive term in the total loss.
  double lambda_weight = 0.5;
  /// Divide scores by the response length before comparing them.
  bool length_normalize_score = true;

  /// Throws ConfigError for negative or non-finite values.
  void validate() const;

  friend bool operator==(const ObjectiveConfig&, const ObjectiveConfig&) = default;
};

struct LossBreakdown {
  double lm = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
  double hinge_context = 0.0;
  double hinge_speaker = 0.0;
};

/// The three scores behind one contrastive evaluation.
struct TripleScores {
  double positive = 0.0;
  double negative_context = 0.0;  ///< f(X, Y_neg_context)
  double negative_speaker = 0.0;  ///< f(X_neg_speaker, Y)
};

/// Mean per-token negative log-likelihood of `response` given `context`.
double lm_loss(const ModelConfig& config, const Parameters& params,
               std::span<const TokenId> context, std::span<const TokenId> response);

/// log f(X, Y), divided by len(Y) when `length_normalize_score` is set.
double score(const ModelConfig& config, const Parameters& params,
             std::span<const TokenId> context, std::span<const TokenId> response,
             const ObjectiveConfig& objective);

struct HingePair {
  double context = 0.0;
  double speaker = 0.0;
  double sum() const { return context + speaker; }
};

/// max(0, margin + neg - pos) for both negatives.
HingePair hinge_terms(const TripleScores& scores, double margin);

TripleScores score_triple(const ModelConfig& config, const Parameters& params,
                          const TrainingTriple& triple, const ObjectiveConfig& objective);

/// Returns the summed hinge loss; per-term values go to `terms` when given.
double contrastive_loss(const ModelConfig& config, const Parameters& params,
                        const TrainingTriple& triple, const ObjectiveConfig& objective,
                        HingePair* terms = nullptr);

/// lm(X, Y) + lambda * contrastive(triple).
LossBreakdown total_loss(const ModelConfig& config, const Parameters& params,
                         const TrainingTriple& triple, const ObjectiveConfig& objective);

/// Evaluates the total loss and accumulates `weight` times its gradient into
/// `grads`. A hinge exactly at its kink counts as active. With
/// lambda_weight == 0 the contrastive term is evaluated but contributes no
/// gradient at all.
LossBreakdown total_loss_with_gradient(const ModelConfig& config, const Parameters& params,
                                       const TrainingTriple& triple,
                                       const ObjectiveConfig& objective, double weight,
                                       Parameters& grads, TripleScores* scores = nullptr);

/// LM-only loss and `weight` times its gradient (the contrastive-free path).
double lm_loss_with_gradient(const ModelConfig& config, const Parameters& params,
                             std::span<const TokenId> context,
                             std::span<const TokenId> response, double weight, Parameters& grads);

}  // namespace salm
