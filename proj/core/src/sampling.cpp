#include "salm/sampling.hpp"

#include <utility>

#include "salm/error.hpp"
#include "salm/random.hpp"

namespace salm {

ExamplePool::ExamplePool(std::vector<Dialogue> dialogues, Vocabulary vocab,
                         ExampleOptions options)
    : dialogues_(std::move(dialogues)), vocab_(std::move(vocab)), options_(options) {
  slots_.reserve(dialogues_.size());
  words_.reserve(dialogues_.size());
  for (std::size_t d = 0; d < dialogues_.size(); ++d) {
    slots_.emplace_back(dialogues_[d]);
    auto& words = words_.emplace_back();
    for (const auto& u : dialogues_[d].utterances) words.push_back(encode_words(u.text, vocab_));
    auto examples = make_examples(dialogues_[d], d, vocab_, options_);
    for (auto& e : examples) examples_.push_back(std::move(e));
  }
}

NegativeResponse sample_negative_context_response(const Example& positive,
                                                  const ExamplePool& pool, std::uint64_t seed) {
  if (pool.dialogues().size() < 2)
    throw SamplingError("negative response sampling needs at least 2 dialogues in the pool");
  const std::size_t limit = pool.options().max_sequence;
  auto eligible = [&](const Example& e) {
    if (e.dialogue == positive.dialogue) return false;
    return limit == 0 || positive.context.token_ids.size() + e.response.size() <= limit;
  };
  std::size_t count = 0;
  for (const auto& e : pool.examples()) count += eligible(e) ? 1 : 0;
  if (count == 0)
    throw SamplingError("no example from another dialogue is eligible as a negative response");

  Rng rng(seed);
  std::size_t pick = uniform_index(rng, count);
  for (const auto& e : pool.examples()) {
    if (!eligible(e)) continue;
    if (pick-- == 0) return {e.response, e.dialogue, e.target};
  }
  throw SamplingError("unreachable: sampler ran past the eligible set");
}

NegativeContext sample_negative_speaker_context(const Example& positive, const ExamplePool& pool,
                                                std::uint64_t seed) {
  const std::size_t n = positive.context.utterance_count();
  if (n == 0) throw SamplingError("speaker negative needs at least one context utterance");
  const auto& dialogue = pool.dialogues().at(positive.dialogue);
  const auto& vocab = pool.vocab();

  Rng rng(seed);
  const std::size_t replaced = uniform_index(rng, n);
  const std::size_t absolute = positive.context_begin + replaced;
  const std::string& replaced_speaker = dialogue.utterances.at(absolute).speaker;

  const auto& seg = positive.context.segments[replaced];
  const std::size_t limit = pool.options().max_sequence;
  const std::size_t budget =
      limit == 0 ? 0 : limit - positive.sequence_length() + (seg.end - seg.begin);
  auto fits = [&](std::size_t d, std::size_t u) {
    return limit == 0 || 1 + pool.utterance_words(d, u).size() <= budget;
  };

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t u = 0; u < dialogue.utterances.size(); ++u) {
    if (u == positive.target || dialogue.utterances[u].speaker == replaced_speaker) continue;
    if (fits(positive.dialogue, u)) candidates.emplace_back(positive.dialogue, u);
  }
  const SpeakerSlots& own_slots = pool.slots(positive.dialogue);
  if (candidates.empty()) {
    const bool free_slot = own_slots.size() < vocab.speaker_slots();
    for (std::size_t d = 0; d < pool.dialogues().size(); ++d) {
      if (d == positive.dialogue) continue;
      const auto& other = pool.dialogues()[d];
      for (std::size_t u = 0; u < other.utterances.size(); ++u) {
        const auto& label = other.utterances[u].speaker;
        if (label == replaced_speaker) continue;
        if (!own_slots.find(label) && !free_slot) continue;
        if (fits(d, u)) candidates.emplace_back(d, u);
      }
    }
  }
  if (candidates.empty())
    throw SamplingError("no utterance by a different speaker is eligible as a replacement");

  const auto [src_d, src_u] = candidates[uniform_index(rng, candidates.size())];
  SpeakerSlots slots = own_slots;
  const std::size_t new_slot = slots.add(pool.dialogues()[src_d].utterances[src_u].speaker);

  NegativeContext out;
  out.replaced_segment = replaced;
  out.source_dialogue = src_d;
  out.source_utterance = src_u;
  auto& ctx = out.context;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t begin = ctx.token_ids.size();
    if (k == replaced) {
      ctx.token_ids.push_back(vocab.speaker_token(new_slot));
      const auto& words = pool.utterance_words(src_d, src_u);
      ctx.token_ids.insert(ctx.token_ids.end(), words.begin(), words.end());
      ctx.segments.push_back({begin, ctx.token_ids.size(), new_slot});
    } else {
      auto tokens = positive.context.segment_tokens(k);
      ctx.token_ids.insert(ctx.token_ids.end(), tokens.begin(), tokens.end());
      ctx.segments.push_back({begin, ctx.token_ids.size(), positive.context.segments[k].slot});
    }
  }
  if (positive.context.prompt_slot) append_prompt(ctx, *positive.context.prompt_slot, vocab);
  return out;
}

TrainingTriple make_triple(const Example& positive, const ExamplePool& pool, std::uint64_t seed) {
  auto neg_response = sample_negative_context_response(positive, pool, derive_seed(seed, {0}));
  auto neg_context = sample_negative_speaker_context(positive, pool, derive_seed(seed, {1}));
  TrainingTriple t;
  t.context = positive.context;
  t.response = positive.response;
  t.neg_response = std::move(neg_response.tokens);
  t.neg_context = std::move(neg_context.context);
  t.provenance = {positive.dialogue,
                  positive.target,
                  neg_response.dialogue,
                  neg_response.target,
                  neg_context.replaced_segment,
                  neg_context.source_dialogue,
                  neg_context.source_utterance};
  t.seed = seed;
  return t;
}

}  // namespace salm
