#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "salm/checkpoint.hpp"
#include "salm/error.hpp"
#include "salm/objectives.hpp"
#include "salm/trainer.hpp"

namespace salm {
namespace {

TrainConfig small_config(std::size_t epochs = 3) {
  TrainConfig c;
  c.model = testing::tiny_model(0, 3);
  c.batch_size = 4;
  c.epochs = epochs;
  c.seed = 11;
  c.adam.learning_rate = 1e-3;
  c.data.speaker_slots = 4;
  return c;
}

ExamplePool overfit_pool() {
  SynthConfig sc;
  sc.dialogues = 5;
  sc.speakers = 4;
  sc.seed = 1;
  sc.min_turns = 3;
  sc.max_turns = 3;
  auto corpus = generate_synthetic_corpus(sc);
  auto vocab = build_vocabulary(corpus, 1, 4);
  return ExamplePool(std::move(corpus), std::move(vocab), {1, 256});
}

void expect_same_history(const std::vector<EpochStats>& a, const std::vector<EpochStats>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].lm, b[i].lm) << "epoch " << i + 1;
    EXPECT_EQ(a[i].total, b[i].total) << "epoch " << i + 1;
  }
}

TEST(Train, FixedSeedIsBitReproducible) {
  const auto pool = testing::small_pool();
  const auto a = train(pool, small_config());
  const auto b = train(pool, small_config());
  EXPECT_TRUE(a.checkpoint == b.checkpoint);
  expect_same_history(a.history, b.history);
  for (std::size_t i = 0; i < a.history.size(); ++i)
    EXPECT_EQ(a.history[i].contrastive, b.history[i].contrastive);
}

TEST(Train, ResumeMatchesUninterrupted) {
  const auto pool = testing::small_pool();
  const auto full = train(pool, small_config(3));
  const auto first = train(pool, small_config(2));
  // through the on-disk format
  const auto reloaded = deserialize_checkpoint(serialize_checkpoint(first.checkpoint));
  const auto rest = train(pool, small_config(3), {}, &reloaded);
  ASSERT_EQ(rest.history.size(), 1u);
  EXPECT_EQ(rest.history[0].total, full.history[2].total);
  EXPECT_TRUE(rest.checkpoint.params == full.checkpoint.params);
  EXPECT_TRUE(rest.checkpoint.optimizer == full.checkpoint.optimizer);
  EXPECT_EQ(rest.checkpoint.epoch, 3u);
}

TEST(Train, LambdaZeroMatchesContrastiveDisabled) {
  const auto pool = testing::small_pool();
  auto zero = small_config();
  zero.objective.lambda_weight = 0.0;
  auto off = small_config();
  off.contrastive_enabled = false;
  const auto a = train(pool, zero);
  const auto b = train(pool, off);
  expect_same_history(a.history, b.history);
  EXPECT_TRUE(a.checkpoint.params == b.checkpoint.params);
  EXPECT_TRUE(a.checkpoint.optimizer == b.checkpoint.optimizer);
  EXPECT_TRUE(std::isnan(b.history[0].rank_acc_ctx));
  EXPECT_FALSE(std::isnan(a.history[0].rank_acc_ctx));
}

TEST(Train, ContrastiveChangesTrajectory) {
  const auto pool = testing::small_pool();
  auto off = small_config();
  off.contrastive_enabled = false;
  EXPECT_FALSE(train(pool, small_config()).checkpoint.params == train(pool, off).checkpoint.params);
}

TEST(Train, EmptyExampleSetIsConfigError) {
  auto corpus = std::vector<Dialogue>{testing::dialogue("a", {{"A", "x"}, {"B", "y"}})};
  auto vocab = build_vocabulary(corpus, 1, 2);
  const ExamplePool pool(std::move(corpus), std::move(vocab), {2, 0});
  EXPECT_THROW(train(pool, small_config()), ConfigError);
}

TEST(Train, NonFiniteLossCallsDivergenceHook) {
  const auto pool = testing::small_pool();
  auto start = initial_checkpoint(small_config(), pool.vocab());
  start.params.output_bias(0, 5) = std::numeric_limits<double>::infinity();
  bool called = false;
  TrainHooks hooks;
  hooks.on_diverged = [&](const Checkpoint& c) {
    called = true;
    EXPECT_EQ(c.epoch, 0u);
  };
  EXPECT_THROW(train(pool, small_config(), hooks, &start), TrainingError);
  EXPECT_TRUE(called);
}

TEST(Train, ResumeWithOtherVocabularyIsRejected) {
  const auto pool = testing::small_pool();
  const Vocabulary other({"unrelated", "words"}, 4);
  const auto start = initial_checkpoint(small_config(), other);
  EXPECT_THROW(train(pool, small_config(), {}, &start), ConfigError);
}

TEST(Train, OverfitsTenExamplesAndDecodesThem) {
  const auto pool = overfit_pool();
  ASSERT_EQ(pool.examples().size(), 10u);
  TrainConfig c;
  c.epochs = 300;
  c.seed = 1;
  c.objective.lambda_weight = 0.0;
  c.data.speaker_slots = 4;
  const auto r = train(pool, c);
  EXPECT_LT(r.history.back().lm, r.history.front().lm);
  double final_lm = 0.0;
  for (const auto& ex : pool.examples()) {
    final_lm += lm_loss(r.checkpoint.model, r.checkpoint.params, ex.context.token_ids, ex.response);
    EXPECT_EQ(decode(r.checkpoint.model, r.checkpoint.params, ex.context.token_ids,
                     {DecodeMode::kGreedy, 32}),
              ex.response);
  }
  EXPECT_LT(final_lm / 10.0, 0.05);
}

TEST(RankingAccuracy, TiesCountAsFailures) {
  const auto pool = testing::small_pool();
  const auto config = testing::tiny_model(pool.vocab().size());
  const auto triples = sample_triples(pool, 12, 3);
  const auto acc = ranking_accuracy(config, Parameters::zeros(config), triples, ObjectiveConfig{});
  EXPECT_EQ(acc.first, 0.0);
  EXPECT_EQ(acc.second, 0.0);
}

TEST(RankingAccuracy, SingleTriplePositiveBetter) {
  const auto pool = testing::small_pool();
  const auto trained = train(pool, small_config(4)).checkpoint;
  const ObjectiveConfig obj;
  for (const auto& t : sample_triples(pool, pool.examples().size(), 21)) {
    const auto s = score_triple(trained.model, trained.params, t, obj);
    if (s.positive > s.negative_context && s.positive > s.negative_speaker) {
      const auto acc = ranking_accuracy(trained.model, trained.params, std::span(&t, 1), obj);
      EXPECT_EQ(acc.first, 1.0);
      EXPECT_EQ(acc.second, 1.0);
      return;
    }
  }
  FAIL() << "no triple ranked correctly on both negatives";
}

TEST(RankingAccuracy, EmptyIsZero) {
  const auto config = testing::tiny_model(10);
  const auto acc = ranking_accuracy(config, Parameters::zeros(config), {}, ObjectiveConfig{});
  EXPECT_EQ(acc.first, 0.0);
}

TEST(SampleTriples, CyclesExamplesDeterministically) {
  const auto pool = testing::small_pool();
  const auto n = pool.examples().size();
  const auto a = sample_triples(pool, n + 2, 8);
  const auto b = sample_triples(pool, n + 2, 8);
  ASSERT_EQ(a.size(), n + 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].response, pool.examples()[i % n].response);
    EXPECT_EQ(a[i].neg_context, b[i].neg_context);
  }
}

TEST(HistoryCsv, HeaderAndBlankAccuraciesWhenDisabled) {
  std::ostringstream out;
  const std::vector<EpochStats> h = {{1, 2.5, 0.0, 2.5, std::nan(""), std::nan("")},
                                     {2, 2.0, 0.5, 2.25, 0.75, 0.5}};
  write_history_csv(out, h);
  EXPECT_EQ(out.str(),
            "epoch,lm,contrastive,total,rank_acc_ctx,rank_acc_spk\n"
            "1,2.5,0,2.5,,\n"
            "2,2,0.5,2.25,0.75,0.5\n");
}

}  // namespace
}  // namespace salm
