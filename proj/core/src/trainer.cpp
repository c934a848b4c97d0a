#include "salm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "salm/error.hpp"
#include "salm/random.hpp"

namespace salm {

namespace {
// sub-stream tags for derive_seed
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kNegativeStream = 0x4e4547ULL;
}  // namespace

void TrainConfig::validate() const {
  adam.validate();
  objective.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (data.min_count == 0) throw ConfigError("min_count must be positive");
  if (data.speaker_slots == 0) throw ConfigError("speaker_slots must be positive");
  if (data.min_context == 0) throw ConfigError("min_context must be positive");
  ModelConfig probe = model;
  if (probe.vocab_size == 0) probe.vocab_size = 1;
  probe.validate();
}

Checkpoint initial_checkpoint(const TrainConfig& config, const Vocabulary& vocab) {
  config.validate();
  Checkpoint c;
  c.train = config;
  c.train.model.vocab_size = vocab.size();
  c.model = c.train.model;
  c.params = init_parameters(c.model);
  c.optimizer = OptimizerState::zeros(c.model);
  c.epoch = 0;
  c.vocab_digest = vocab.digest();
  return c;
}

TrainResult train(const ExamplePool& pool, const TrainConfig& config, const TrainHooks& hooks,
                  const Checkpoint* resume) {
  config.validate();
  const auto& examples = pool.examples();
  if (examples.empty()) throw ConfigError("the corpus yields no training examples");

  TrainResult result;
  Checkpoint& state = result.checkpoint;
  if (resume) {
    state = *resume;
    if (state.vocab_digest != pool.vocab().digest())
      throw ConfigError("checkpoint was trained with a different vocabulary");
    ModelConfig expected = config.model;
    expected.vocab_size = pool.vocab().size();
    if (!(state.model == expected))
      throw ConfigError("checkpoint model config does not match the training config");
    state.train = config;
    state.train.model = expected;
  } else {
    state = initial_checkpoint(config, pool.vocab());
  }
  const ModelConfig& model = state.model;
  if (pool.options().max_sequence > model.max_seq_len)
    throw ConfigError("example length bound exceeds the model's max_seq_len");

  std::vector<std::size_t> order(examples.size());
  Parameters grads = Parameters::zeros(model);
  for (std::uint64_t epoch = state.epoch; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {kShuffleStream, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double sum_lm = 0.0, sum_contrastive = 0.0, sum_total = 0.0;
    std::size_t wins_ctx = 0, wins_spk = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      grads.set_zero();
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t idx = order[i];
        const Example& ex = examples[idx];
        LossBreakdown loss;
        if (config.contrastive_enabled) {
          const TrainingTriple triple =
              make_triple(ex, pool, derive_seed(config.seed, {kNegativeStream, epoch, idx}));
          TripleScores scores;
          loss = total_loss_with_gradient(model, state.params, triple, config.objective, weight,
                                          grads, &scores);
          wins_ctx += scores.positive > scores.negative_context ? 1 : 0;
          wins_spk += scores.positive > scores.negative_speaker ? 1 : 0;
        } else {
          loss.lm = lm_loss_with_gradient(model, state.params, ex.context.token_ids, ex.response,
                                          weight, grads);
          loss.total = loss.lm;
        }
        if (!std::isfinite(loss.total)) {
          if (hooks.on_diverged) hooks.on_diverged(state);
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                              ", example " + std::to_string(idx));
        }
        sum_lm += loss.lm;
        sum_contrastive += loss.contrastive;
        sum_total += loss.total;
      }
      adam_step(state.params, grads, state.optimizer, config.adam);
    }
    state.epoch = epoch + 1;

    const double n = static_cast<double>(examples.size());
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.lm = sum_lm / n;
    stats.contrastive = sum_contrastive / n;
    stats.total = sum_total / n;
    if (config.contrastive_enabled) {
      stats.rank_acc_ctx = static_cast<double>(wins_ctx) / n;
      stats.rank_acc_spk = static_cast<double>(wins_spk) / n;
    } else {
      stats.rank_acc_ctx = std::numeric_limits<double>::quiet_NaN();
      stats.rank_acc_spk = std::numeric_limits<double>::quiet_NaN();
    }
    result.history.push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);
  }
  return result;
}

std::pair<double, double> ranking_accuracy(const ModelConfig& config, const Parameters& params,
                                           std::span<const TrainingTriple> triples,
                                           const ObjectiveConfig& objective) {
  if (triples.empty()) return {0.0, 0.0};
  std::size_t ctx = 0, spk = 0;
  for (const auto& t : triples) {
    const TripleScores s = score_triple(config, params, t, objective);
    ctx += s.positive > s.negative_context ? 1 : 0;
    spk += s.positive > s.negative_speaker ? 1 : 0;
  }
  const double n = static_cast<double>(triples.size());
  return {static_cast<double>(ctx) / n, static_cast<double>(spk) / n};
}

std::vector<TrainingTriple> sample_triples(const ExamplePool& pool, std::size_t count,
                                           std::uint64_t seed) {
  const auto& examples = pool.examples();
  if (examples.empty()) throw SamplingError("pool has no examples to build triples from");
  std::vector<TrainingTriple> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(make_triple(examples[i % examples.size()], pool, derive_seed(seed, {i})));
  return out;
}

void write_history_csv(std::ostream& out, std::span<const EpochStats> history) {
  out << "epoch,lm,contrastive,total,rank_acc_ctx,rank_acc_spk\n";
  out << std::setprecision(10);
  for (const auto& s : history) {
    out << s.epoch << ',' << s.lm << ',' << s.contrastive << ',' << s.total << ',';
    if (std::isnan(s.rank_acc_ctx)) out << ",";
    else out << s.rank_acc_ctx << ',';
    if (!std::isnan(s.rank_acc_spk)) out << s.rank_acc_spk;
    out << '\n';
  }
}

}  // namespace salm
