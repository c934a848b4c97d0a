#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "salm/checkpoint.hpp"
#include "salm/config_file.hpp"
#include "salm/error.hpp"

namespace salm {
namespace {

Checkpoint sample_checkpoint() {
  TrainConfig t;
  t.model = testing::tiny_model(0, 5);
  t.adam.grad_clip_norm.reset();
  t.objective.margin = 0.3;
  t.seed = 12345678901234ull;
  const Vocabulary vocab({"a", "b", "c"}, 2);
  Checkpoint c = initial_checkpoint(t, vocab);
  // non-trivial optimizer moments and odd values
  c.optimizer.first_moment = init_parameters(testing::tiny_model(vocab.size(), 8));
  c.optimizer.second_moment = init_parameters(testing::tiny_model(vocab.size(), 9));
  c.optimizer.step = 17;
  c.params.output_bias(0, 1) = 1.0 / 3.0;
  c.params.output_bias(0, 2) = -0.0;
  c.params.output_bias(0, 3) = 5e-324;
  c.epoch = 4;
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto c = sample_checkpoint();
  const auto back = deserialize_checkpoint(serialize_checkpoint(c));
  EXPECT_TRUE(back == c);
  EXPECT_TRUE(std::signbit(back.params.output_bias(0, 2)));
  EXPECT_EQ(back.train, c.train);
  EXPECT_EQ(back.vocab_digest, c.vocab_digest);
}

TEST(Checkpoint, SaveLoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "salm_ckpt_test.bin";
  const auto c = sample_checkpoint();
  save_checkpoint(c, path);
  EXPECT_TRUE(load_checkpoint(path) == c);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, TruncationIsIntegrityError) {
  const auto bytes = serialize_checkpoint(sample_checkpoint());
  for (std::size_t keep : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, keep)), IntegrityError) << keep;
}

TEST(Checkpoint, FlippedByteIsIntegrityError) {
  auto bytes = serialize_checkpoint(sample_checkpoint());
  bytes[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(deserialize_checkpoint(bytes), IntegrityError);
  auto magic = serialize_checkpoint(sample_checkpoint());
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic), IntegrityError);
}

TEST(Checkpoint, VersionMismatchIsVersionError) {
  auto c = sample_checkpoint();
  c.version = 2;
  EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(c)), VersionError);
}

TEST(TrainConfigFile, ParseAndFormatRoundTrip) {
  std::istringstream in(
      "# desk run\n"
      "learning_rate = 0.001\n"
      "batch_size=8\n"
      "grad_clip_norm = none\n"
      "lambda_weight = 0\n"
      "contrastive = false\n"
      "seed = 9\n"
      "d_model = 32\n");
  const auto c = parse_train_config(in);
  EXPECT_EQ(c.adam.learning_rate, 0.001);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_FALSE(c.adam.grad_clip_norm);
  EXPECT_FALSE(c.contrastive_enabled);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model.seed, 9u);
  EXPECT_EQ(c.model.d_model, 32u);
  std::istringstream again(format_train_config(c));
  EXPECT_EQ(parse_train_config(again), c);
}

TEST(TrainConfigFile, InitSeedOverridesModelSeedRegardlessOfOrder) {
  std::istringstream in("init_seed = 4\nseed = 9\n");
  const auto c = parse_train_config(in);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model.seed, 4u);
}

TEST(TrainConfigFile, Errors) {
  std::istringstream unknown("learning_rat = 1\n");
  EXPECT_THROW(parse_train_config(unknown), ConfigError);
  std::istringstream bad("batch_size = lots\n");
  EXPECT_THROW(parse_train_config(bad), ConfigError);
  std::istringstream noeq("batch_size 3\n");
  EXPECT_THROW(parse_train_config(noeq), ConfigError);
  std::istringstream range("beta2 = 1.5\n");
  EXPECT_THROW(parse_train_config(range), ConfigError);
  TrainConfig c;
  EXPECT_THROW(apply_setting(c, "epochs", "-1"), ConfigError);
}

}  // namespace
}  // namespace salm
