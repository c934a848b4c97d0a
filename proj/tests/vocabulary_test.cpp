#include <gtest/gtest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "salm/error.hpp"
#include "salm/vocabulary.hpp"

namespace salm {
namespace {

using testing::dialogue;

TEST(BuildVocabulary, MinCountThreshold) {
  const std::vector<Dialogue> ds = {
      dialogue("a", {{"A", "hi yo rare"}, {"B", "hi yo"}}),
      dialogue("b", {{"A", "hi"}, {"B", "YO"}}),
  };
  const auto v = build_vocabulary(ds, 2, 2);
  EXPECT_TRUE(v.find("hi"));
  EXPECT_TRUE(v.find("yo"));
  EXPECT_FALSE(v.find("rare"));
  EXPECT_EQ(v.word_id("rare"), Vocabulary::kUnk);
}

TEST(BuildVocabulary, MinimalDialogueLayout) {
  const std::vector<Dialogue> ds = {dialogue("d1", {{"A", "hi"}, {"B", "yo"}})};
  const auto v = build_vocabulary(ds, 1, 2);
  EXPECT_EQ(v.size(), 2u + 4u + 2u);
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocabulary::kBos), "<bos>");
  EXPECT_EQ(v.token(Vocabulary::kEos), "<eos>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.token(v.speaker_token(0)), "[S0]");
  EXPECT_EQ(v.speaker_token(1), 5);
  EXPECT_EQ(v.token(6), "hi");
  EXPECT_EQ(v.token(7), "yo");
  EXPECT_THROW(v.speaker_token(2), EncodingError);
  EXPECT_THROW(v.token(8), IndexError);
}

TEST(BuildVocabulary, TooFewSlotsIsConfigError) {
  const std::vector<Dialogue> ds = {dialogue("d", {{"A", "x"}, {"B", "y"}, {"C", "z"}})};
  EXPECT_THROW(build_vocabulary(ds, 1, 2), ConfigError);
  EXPECT_NO_THROW(build_vocabulary(ds, 1, 3));
  EXPECT_THROW(build_vocabulary({}, 1, 3), ConfigError);
}

TEST(Vocabulary, DecodeEncodeRoundTrip) {
  const auto ds = generate_synthetic_corpus({.dialogues = 8, .speakers = 4, .seed = 1});
  const auto v = build_vocabulary(ds, 1, 4);
  for (const auto& w : v.tokens()) {
    const auto id = v.find(w);
    ASSERT_TRUE(id);
    EXPECT_EQ(v.token(*id), w);
    if (v.is_word(*id)) EXPECT_EQ(v.decode(std::vector<TokenId>{v.word_id(w)}), w);
  }
}

TEST(Vocabulary, DecodeWordsDropsReserved) {
  const Vocabulary v({"a", "b"}, 1);
  const std::vector<TokenId> ids = {Vocabulary::kBos, 5, Vocabulary::kUnk, 6, Vocabulary::kEos};
  EXPECT_EQ(v.decode_words(ids), "a b");
  EXPECT_EQ(v.decode(ids), "<bos> a <unk> b <eos>");
}

TEST(Vocabulary, JsonRoundTripAndDigest) {
  const Vocabulary v({"alpha", "beta"}, 3);
  const auto back = Vocabulary::from_json(v.to_json());
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.digest(), v.digest());
  EXPECT_NE(Vocabulary({"alpha", "gamma"}, 3).digest(), v.digest());
  EXPECT_THROW(Vocabulary::from_json("{"), ParseError);
  EXPECT_THROW(Vocabulary::from_json(R"({"tokens":["x"],"speaker_slots":0})"), ValidationError);
}

TEST(Vocabulary, SaveLoad) {
  const auto path = std::filesystem::temp_directory_path() / "salm_vocab_test.json";
  const Vocabulary v({"x", "y", "z"}, 2);
  v.save(path);
  EXPECT_EQ(Vocabulary::load(path), v);
  std::filesystem::remove(path);
}

TEST(Vocabulary, SpeakerSlotLookup) {
  const Vocabulary v({"a"}, 2);
  EXPECT_EQ(v.speaker_slot_of(5), 1u);
  EXPECT_FALSE(v.speaker_slot_of(6));
  EXPECT_FALSE(v.speaker_slot_of(Vocabulary::kEos));
  EXPECT_TRUE(v.is_word(6));
  EXPECT_FALSE(v.is_word(4));
}

}  // namespace
}  // namespace salm
