#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "salm/corpus.hpp"

namespace salm {

/// Generator for a corpus in which speaker identity and context are
/// learnable. Speaker k (label `spk{k}`) only ever uses words `s{k}w{j}`
/// from its own sub-vocabulary, and every utterance reads
/// `<own words...> <previous topic> <new topic>`, chaining topics `t{j}`
/// from one turn to the next.
struct SynthConfig {
  std::size_t dialogues = 100;
  std::size_t speakers = 4;
  std::uint64_t seed = 0;
  std::size_t min_turns = 4;
  std::size_t max_turns = 8;
  std::size_t words_per_speaker = 6;
  std::size_t words_per_utterance = 2;
  std::size_t topics = 20;
};

/// Throws ConfigError for fewer than two speakers, zero dialogues or an
/// empty turn range.
std::vector<Dialogue> generate_synthetic_corpus(const SynthConfig& config);

std::string synthetic_speaker_label(std::size_t speaker);
std::string synthetic_speaker_word(std::size_t speaker, std::size_t word);
std::string synthetic_topic(std::size_t topic);

}  // namespace salm
