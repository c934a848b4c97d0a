#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "salm/model.hpp"
#include "salm/objectives.hpp"
#include "salm/optimizer.hpp"
#include "salm/sampling.hpp"

namespace salm {

/// Corpus-preparation knobs that travel with a training run.
struct DataConfig {
  std::size_t min_count = 1;
  std::size_t speaker_slots = 8;
  std::size_t min_context = 1;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  ObjectiveConfig objective;
  /// `vocab_size` is filled in from the vocabulary when a run starts.
  ModelConfig model;
  /// When false the negatives are never sampled and only the LM loss is
  /// minimized (the contrastive-free build of the objective).
  bool contrastive_enabled = true;
  DataConfig data;

  /// Throws ConfigError on any out-of-range value.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  std::uint64_t epoch = 0;  ///< 1-based
  double lm = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
  /// Pre-update ranking accuracy over the epoch's sampled triples; NaN when
  /// the contrastive path is disabled.
  double rank_acc_ctx = 0.0;
  double rank_acc_spk = 0.0;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t version = kFormatVersion;
  ModelConfig model;
  Parameters params;
  OptimizerState optimizer;
  TrainConfig train;
  std::uint64_t epoch = 0;  ///< completed epochs
  std::string vocab_digest;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> history;
};

struct TrainHooks {
  std::function<void(const EpochStats&)> on_epoch;
  /// Receives the last good state before a TrainingError for a non-finite
  /// loss is thrown.
  std::function<void(const Checkpoint&)> on_diverged;
};

/// Fresh checkpoint at epoch 0 with initialized parameters.
Checkpoint initial_checkpoint(const TrainConfig& config, const Vocabulary& vocab);

/// Minimizes the total loss over `pool.examples()` for `config.epochs`
/// epochs. Batch order and negatives are drawn from seeds derived from
/// (config.seed, epoch, example index), so a run resumed from `resume`
/// continues exactly the trajectory of an uninterrupted one. Throws
/// ConfigError when there are no examples or `resume` does not match.
TrainResult train(const ExamplePool& pool, const TrainConfig& config, const TrainHooks& hooks = {},
                  const Checkpoint* resume = nullptr);

/// (fraction with f(X,Y) > f(X,Y_neg_context), fraction with
/// f(X,Y) > f(X_neg_speaker,Y)). Ties count as failures.
std::pair<double, double> ranking_accuracy(const ModelConfig& config, const Parameters& params,
                                           std::span<const TrainingTriple> triples,
                                           const ObjectiveConfig& objective);

/// `count` triples cycling through the pool's examples in order.
std::vector<TrainingTriple> sample_triples(const ExamplePool& pool, std::size_t count,
                                           std::uint64_t seed);

void write_history_csv(std::ostream& out, std::span<const EpochStats> history);

}  // namespace salm
