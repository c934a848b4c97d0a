#include "salm/encoding.hpp"

#include "salm/error.hpp"

namespace salm {

std::vector<TokenId> encode_words(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& w : tokenize(text)) ids.push_back(vocab.word_id(w));
  return ids;
}

EncodedContext encode_context(std::span<const Utterance> prefix, const Vocabulary& vocab,
                              const SpeakerSlots& slots) {
  EncodedContext out;
  for (const auto& u : prefix) {
    const std::size_t slot = slots.at(u.speaker);
    const std::size_t begin = out.token_ids.size();
    out.token_ids.push_back(vocab.speaker_token(slot));
    for (TokenId id : encode_words(u.text, vocab)) out.token_ids.push_back(id);
    out.segments.push_back({begin, out.token_ids.size(), slot});
  }
  return out;
}

void append_prompt(EncodedContext& context, std::size_t slot, const Vocabulary& vocab) {
  if (context.prompt_slot) throw EncodingError("context already carries a prompt token");
  context.token_ids.push_back(vocab.speaker_token(slot));
  context.prompt_slot = slot;
}

std::string decode_context(const EncodedContext& context, const Vocabulary& vocab) {
  return vocab.decode(context.token_ids);
}

void check_context(const EncodedContext& context, const Vocabulary& vocab) {
  std::size_t cursor = 0;
  for (const auto& s : context.segments) {
    if (s.begin != cursor || s.end <= s.begin || s.end > context.token_ids.size())
      throw EncodingError("segments do not tile the context");
    if (vocab.speaker_slot_of(context.token_ids[s.begin]) != s.slot)
      throw EncodingError("segment does not start with its speaker token");
    for (std::size_t i = s.begin + 1; i < s.end; ++i) {
      if (vocab.speaker_slot_of(context.token_ids[i]))
        throw EncodingError("segment holds more than one speaker token");
    }
    cursor = s.end;
  }
  const std::size_t tail = context.prompt_slot ? 1 : 0;
  if (cursor + tail != context.token_ids.size())
    throw EncodingError("segments do not cover the context");
  if (context.prompt_slot &&
      vocab.speaker_slot_of(context.token_ids.back()) != context.prompt_slot)
    throw EncodingError("prompt token does not match prompt slot");
}

std::vector<Example> make_examples(const Dialogue& dialogue, std::size_t dialogue_index,
                                   const Vocabulary& vocab, const ExampleOptions& options) {
  if (options.min_context == 0) throw ConfigError("min_context must be at least 1");
  const SpeakerSlots slots(dialogue);
  const auto& utts = dialogue.utterances;

  std::vector<std::size_t> encoded_len(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i)
    encoded_len[i] = 1 + tokenize(utts[i].text).size();

  std::vector<Example> out;
  for (std::size_t t = options.min_context; t < utts.size(); ++t) {
    std::vector<TokenId> response = encode_words(utts[t].text, vocab);
    response.push_back(Vocabulary::kEos);

    std::size_t begin = 0;
    if (options.max_sequence > 0) {
      // context tokens + prompt + response must fit
      std::size_t total = 1 + response.size();
      for (std::size_t i = 0; i < t; ++i) total += encoded_len[i];
      while (begin < t && total > options.max_sequence) total -= encoded_len[begin++];
      if (begin == t) continue;
    }

    Example ex;
    ex.dialogue = dialogue_index;
    ex.target = t;
    ex.context_begin = begin;
    ex.context = encode_context(std::span(utts).subspan(begin, t - begin), vocab, slots);
    append_prompt(ex.context, slots.at(utts[t].speaker), vocab);
    ex.response = std::move(response);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace salm
