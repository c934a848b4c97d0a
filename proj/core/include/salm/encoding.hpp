#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salm/corpus.hpp"
#include "salm/vocabulary.hpp"

namespace salm {

/// Token range [begin, end) of one utterance, led by its speaker token.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t slot = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Speaker-attributed context. Segments tile `token_ids` in order; when
/// `prompt_slot` is set, one extra trailing token (the next speaker's token)
/// follows the last segment.
struct EncodedContext {
  std::vector<TokenId> token_ids;
  std::vector<Segment> segments;
  std::optional<std::size_t> prompt_slot;

  std::size_t utterance_count() const { return segments.size(); }
  std::span<const TokenId> segment_tokens(std::size_t i) const {
    const auto& s = segments.at(i);
    return std::span<const TokenId>(token_ids).subspan(s.begin, s.end - s.begin);
  }

  friend bool operator==(const EncodedContext&, const EncodedContext&) = default;
};

/// Word ids of one utterance, without a speaker token.
std::vector<TokenId> encode_words(std::string_view text, const Vocabulary& vocab);

/// Concatenates `[speaker token] ++ words` for each utterance.
/// Throws EncodingError for a speaker without a slot.
EncodedContext encode_context(std::span<const Utterance> prefix, const Vocabulary& vocab,
                              const SpeakerSlots& slots);

/// Appends the responder's speaker token as a generation prompt.
void append_prompt(EncodedContext& context, std::size_t slot, const Vocabulary& vocab);

/// Renders the context as `[S0] w w [S1] w ...`.
std::string decode_context(const EncodedContext& context, const Vocabulary& vocab);

/// Checks the tiling and speaker-token invariants. Throws EncodingError.
void check_context(const EncodedContext& context, const Vocabulary& vocab);

/// A positive (context, response) pair cut from one dialogue.
struct Example {
  std::size_t dialogue = 0;       ///< index into the corpus
  std::size_t target = 0;         ///< index of the response utterance
  std::size_t context_begin = 0;  ///< first utterance kept after truncation
  EncodedContext context;         ///< utterances [context_begin, target) plus prompt
  std::vector<TokenId> response;  ///< words of the target utterance, then EOS

  /// Length of the model input BOS ++ context ++ response[:-1].
  std::size_t sequence_length() const { return context.token_ids.size() + response.size(); }
};

struct ExampleOptions {
  std::size_t min_context = 1;
  /// Upper bound on Example::sequence_length(); 0 disables truncation.
  /// Leading utterances are dropped until the example fits, and examples
  /// that cannot keep a single context utterance are skipped.
  std::size_t max_sequence = 0;
};

/// One example per target index t in [min_context, n-1]: the context is
/// utterances [0, t) followed by the speaker token of u_t, the response is
/// the words of u_t followed by EOS.
std::vector<Example> make_examples(const Dialogue& dialogue, std::size_t dialogue_index,
                                   const Vocabulary& vocab, const ExampleOptions& options);

}  // namespace salm
