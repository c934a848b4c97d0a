#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "salm/corpus.hpp"
#include "salm/encoding.hpp"
#include "salm/vocabulary.hpp"

namespace salm {

/// Immutable corpus view used by the negative samplers: dialogues, their
/// speaker slots, pre-encoded utterances and every positive example.
class ExamplePool {
 public:
  ExamplePool(std::vector<Dialogue> dialogues, Vocabulary vocab, ExampleOptions options);

  const std::vector<Dialogue>& dialogues() const { return dialogues_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ExampleOptions& options() const { return options_; }
  const std::vector<Example>& examples() const { return examples_; }
  const SpeakerSlots& slots(std::size_t dialogue) const { return slots_.at(dialogue); }
  /// Word ids of utterance `u` of dialogue `d` (no speaker token).
  const std::vector<TokenId>& utterance_words(std::size_t d, std::size_t u) const {
    return words_.at(d).at(u);
  }

 private:
  std::vector<Dialogue> dialogues_;
  Vocabulary vocab_;
  ExampleOptions options_;
  std::vector<SpeakerSlots> slots_;
  std::vector<std::vector<std::vector<TokenId>>> words_;
  std::vector<Example> examples_;
};

struct NegativeResponse {
  std::vector<TokenId> tokens;
  std::size_t dialogue = 0;
  std::size_t target = 0;
};

struct NegativeContext {
  EncodedContext context;
  std::size_t replaced_segment = 0;
  std::size_t source_dialogue = 0;
  std::size_t source_utterance = 0;
};

/// Response of a uniformly drawn pool example from a different dialogue.
/// Candidates that would overflow `options().max_sequence` next to the
/// positive context are not eligible. Throws SamplingError when nothing is.
NegativeResponse sample_negative_context_response(const Example& positive,
                                                  const ExamplePool& pool, std::uint64_t seed);

/// Replaces one uniformly chosen context utterance by an utterance of a
/// different speaker, preferring the positive's own dialogue (excluding the
/// target utterance) and falling back to the other dialogues. Speakers that
/// are foreign to the dialogue take the next free slot. Throws SamplingError
/// when no replacement is eligible.
NegativeContext sample_negative_speaker_context(const Example& positive, const ExamplePool& pool,
                                                std::uint64_t seed);

struct TripleProvenance {
  std::size_t dialogue = 0;
  std::size_t target = 0;
  std::size_t neg_response_dialogue = 0;
  std::size_t neg_response_target = 0;
  std::size_t replaced_segment = 0;
  std::size_t replacement_dialogue = 0;
  std::size_t replacement_utterance = 0;
};

/// A positive pair with one negative of each kind.
struct TrainingTriple {
  EncodedContext context;
  std::vector<TokenId> response;
  std::vector<TokenId> neg_response;
  EncodedContext neg_context;
  TripleProvenance provenance;
  std::uint64_t seed = 0;
};

/// Draws both negatives for `positive` from independent sub-streams of `seed`.
TrainingTriple make_triple(const Example& positive, const ExamplePool& pool, std::uint64_t seed);

}  // namespace salm
