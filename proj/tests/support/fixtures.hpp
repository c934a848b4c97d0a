#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "salm/corpus.hpp"
#include "salm/model.hpp"
#include "salm/sampling.hpp"
#include "salm/synthetic.hpp"
#include "salm/vocabulary.hpp"

namespace salm::testing {

inline std::vector<Dialogue> parse(const std::string& text, ParseOptions options = {}) {
  std::istringstream in(text);
  return parse_corpus(in, options);
}

inline Dialogue dialogue(std::string id, std::vector<std::pair<std::string, std::string>> turns) {
  Dialogue d{std::move(id), {}};
  for (auto& [s, t] : turns) d.utterances.push_back({s, t});
  return d;
}

inline ModelConfig tiny_model(std::size_t vocab, std::uint64_t seed = 7) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 24;
  c.max_seq_len = 64;
  c.seed = seed;
  return c;
}

/// Small synthetic pool (6 dialogues, 3 speakers) for sampler and loss tests.
inline ExamplePool small_pool(std::uint64_t seed = 3, std::size_t dialogues = 6,
                              std::size_t max_sequence = 64) {
  SynthConfig sc;
  sc.dialogues = dialogues;
  sc.speakers = 3;
  sc.seed = seed;
  sc.min_turns = 3;
  sc.max_turns = 5;
  sc.words_per_speaker = 3;
  sc.topics = 5;
  auto corpus = generate_synthetic_corpus(sc);
  auto vocab = build_vocabulary(corpus, 1, 4);
  return ExamplePool(std::move(corpus), std::move(vocab), {1, max_sequence});
}

}  // namespace salm::testing
