#include "salm/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "salm/error.hpp"
#include "salm/random.hpp"

namespace salm {

std::string synthetic_speaker_label(std::size_t speaker) { return "spk" + std::to_string(speaker); }

std::string synthetic_speaker_word(std::size_t speaker, std::size_t word) {
  return "s" + std::to_string(speaker) + "w" + std::to_string(word);
}

std::string synthetic_topic(std::size_t topic) { return "t" + std::to_string(topic); }

std::vector<Dialogue> generate_synthetic_corpus(const SynthConfig& config) {
  if (config.dialogues == 0) throw ConfigError("synthetic corpus needs at least one dialogue");
  if (config.speakers < 2)
    throw ConfigError("synthetic corpus needs at least 2 speakers to be multi-party");
  if (config.min_turns < 2 || config.max_turns < config.min_turns)
    throw ConfigError("synthetic turn range must satisfy 2 <= min_turns <= max_turns");
  if (config.words_per_speaker == 0 || config.words_per_utterance == 0 || config.topics == 0)
    throw ConfigError("synthetic vocabulary sizes must be positive");

  Rng rng(config.seed);
  std::vector<Dialogue> out;
  out.reserve(config.dialogues);
  for (std::size_t n = 0; n < config.dialogues; ++n) {
    Dialogue d;
    char id[32];
    std::snprintf(id, sizeof id, "syn%05zu", n);
    d.id = id;

    std::vector<std::size_t> cast(config.speakers);
    std::iota(cast.begin(), cast.end(), std::size_t{0});
    std::shuffle(cast.begin(), cast.end(), rng);
    cast.resize(2 + uniform_index(rng, config.speakers - 1));

    const std::size_t turns =
        config.min_turns + uniform_index(rng, config.max_turns - config.min_turns + 1);
    std::size_t topic = uniform_index(rng, config.topics);
    std::size_t previous = cast.size();
    for (std::size_t t = 0; t < turns; ++t) {
      std::size_t who = uniform_index(rng, previous == cast.size() ? cast.size() : cast.size() - 1);
      if (previous != cast.size() && who >= previous) ++who;
      previous = who;
      const std::size_t speaker = cast[who];

      std::string text;
      for (std::size_t w = 0; w < config.words_per_utterance; ++w) {
        text += synthetic_speaker_word(speaker, uniform_index(rng, config.words_per_speaker));
        text += ' ';
      }
      const std::size_t next_topic = uniform_index(rng, config.topics);
      text += synthetic_topic(topic) + ' ' + synthetic_topic(next_topic);
      topic = next_topic;
      d.utterances.push_back({synthetic_speaker_label(speaker), std::move(text)});
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace salm
