#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "salm/corpus.hpp"

namespace salm {

using TokenId = int;

/// Token <-> id mapping. Layout: the four reserved tokens, then the speaker
/// tokens `[S0]`..`[S{k-1}]`, then corpus words in lexicographic order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kReservedCount = 4;

  Vocabulary() : Vocabulary({}, 0) {}
  /// `words` must be distinct and must not collide with reserved or speaker
  /// token strings.
  Vocabulary(std::vector<std::string> words, std::size_t speaker_slots);

  std::size_t size() const { return tokens_.size(); }
  std::size_t speaker_slots() const { return speaker_slots_; }
  std::size_t word_count() const { return size() - kReservedCount - speaker_slots_; }

  /// Throws EncodingError when `slot` is out of range.
  TokenId speaker_token(std::size_t slot) const;
  std::optional<std::size_t> speaker_slot_of(TokenId id) const;
  bool is_word(TokenId id) const;

  std::optional<TokenId> find(std::string_view token) const;
  /// Word lookup with UNK fallback.
  TokenId word_id(std::string_view word) const;
  /// Throws IndexError for ids outside the vocabulary.
  const std::string& token(TokenId id) const;

  /// Space-joined token strings.
  std::string decode(std::span<const TokenId> ids) const;
  /// Like decode, but drops reserved tokens (PAD/BOS/EOS/UNK are kept out of
  /// generated text).
  std::string decode_words(std::span<const TokenId> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Stable hex digest of the token list and slot count.
  std::string digest() const;

  std::string to_json() const;
  /// Throws ParseError / ValidationError on malformed input.
  static Vocabulary from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  static std::string speaker_token_string(std::size_t slot);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.speaker_slots_ == b.speaker_slots_;
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t speaker_slots_ = 0;
  std::unordered_map<std::string, TokenId> index_;
};

/// Word types with frequency >= `min_count` become tokens. Throws ConfigError
/// when a dialogue has more speakers than `max_speaker_slots`.
Vocabulary build_vocabulary(std::span<const Dialogue> dialogues, std::size_t min_count,
                            std::size_t max_speaker_slots);

}  // namespace salm
