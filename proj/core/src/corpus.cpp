#include "salm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "salm/error.hpp"

namespace salm {

using nlohmann::json;

std::size_t Dialogue::speaker_count() const {
  std::set<std::string_view> seen;
  for (const auto& u : utterances) seen.insert(u.speaker);
  return seen.size();
}

std::size_t Dialogue::utterances_by(std::string_view speaker) const {
  return static_cast<std::size_t>(std::count_if(
      utterances.begin(), utterances.end(),
      [&](const Utterance& u) { return u.speaker == speaker; }));
}

std::size_t ValidationReport::utterance_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.utterances.size();
  return n;
}

std::size_t ValidationReport::distinct_speaker_count() const {
  std::set<std::string_view> seen;
  for (const auto& d : dialogues)
    for (const auto& u : d.utterances) seen.insert(u.speaker);
  return seen.size();
}

bool is_valid_speaker_label(std::string_view label) {
  if (label.empty()) return false;
  return std::none_of(label.begin(), label.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '[' || c == ']';
  });
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

struct LineOutcome {
  std::optional<Dialogue> dialogue;
  std::optional<std::string> error;
  bool parse_failure = false;
  std::optional<std::string> warning;
};

LineOutcome read_line(const std::string& line, const ParseOptions& options) {
  LineOutcome out;
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    out.error = std::string("malformed JSON: ") + e.what();
    out.parse_failure = true;
    return out;
  }
  if (!j.is_object()) {
    out.error = "expected a JSON object";
    out.parse_failure = true;
    return out;
  }
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) {
    out.error = "missing string field \"id\"";
    return out;
  }
  Dialogue d;
  d.id = id->get<std::string>();
  auto turns = j.find("turns");
  if (turns == j.end() || !turns->is_array()) {
    out.error = "dialogue '" + d.id + "': missing array field \"turns\"";
    return out;
  }
  for (std::size_t i = 0; i < turns->size(); ++i) {
    const auto& t = (*turns)[i];
    const std::string where = "dialogue '" + d.id + "' turn " + std::to_string(i);
    if (!t.is_object() || !t.contains("speaker") || !t.contains("text") ||
        !t["speaker"].is_string() || !t["text"].is_string()) {
      out.error = where + ": expected {\"speaker\": str, \"text\": str}";
      return out;
    }
    Utterance u{t["speaker"].get<std::string>(), t["text"].get<std::string>()};
    if (!is_valid_speaker_label(u.speaker)) {
      out.error = where + ": invalid speaker label '" + u.speaker + "'";
      return out;
    }
    if (blank(u.text)) {
      out.error = where + ": empty text";
      return out;
    }
    d.utterances.push_back(std::move(u));
  }
  if (d.utterances.size() < 2) {
    out.error = "dialogue '" + d.id + "': needs at least 2 turns, got " +
                std::to_string(d.utterances.size());
    return out;
  }
  if (d.speaker_count() < 2) {
    std::string msg = "dialogue '" + d.id + "': single-speaker dialogue";
    if (!options.lenient) {
      out.error = std::move(msg);
      return out;
    }
    out.warning = std::move(msg);
  }
  out.dialogue = std::move(d);
  return out;
}

}  // namespace

ValidationReport validate_corpus(std::istream& in, const ParseOptions& options) {
  ValidationReport report;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto outcome = read_line(line, options);
    if (outcome.error) {
      report.errors.push_back({lineno, "", *outcome.error});
      continue;
    }
    if (!ids.insert(outcome.dialogue->id).second) {
      report.errors.push_back(
          {lineno, outcome.dialogue->id, "duplicate dialogue id '" + outcome.dialogue->id + "'"});
      continue;
    }
    if (outcome.warning)
      report.warnings.push_back({lineno, outcome.dialogue->id, *outcome.warning});
    report.dialogues.push_back(std::move(*outcome.dialogue));
  }
  return report;
}

std::vector<Dialogue> parse_corpus(std::istream& in, const ParseOptions& options,
                                   std::vector<CorpusIssue>* warnings) {
  std::vector<Dialogue> dialogues;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto outcome = read_line(line, options);
    if (outcome.error) {
      if (outcome.parse_failure) throw ParseError(lineno, *outcome.error);
      throw ValidationError(lineno, *outcome.error);
    }
    if (!ids.insert(outcome.dialogue->id).second)
      throw ValidationError(lineno, "duplicate dialogue id '" + outcome.dialogue->id + "'");
    if (outcome.warning && warnings)
      warnings->push_back({lineno, outcome.dialogue->id, *outcome.warning});
    dialogues.push_back(std::move(*outcome.dialogue));
  }
  return dialogues;
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path,
                                  const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return parse_corpus(in, options);
}

void write_corpus(std::ostream& out, std::span<const Dialogue> dialogues) {
  for (const auto& d : dialogues) {
    json turns = json::array();
    for (const auto& u : d.utterances) turns.push_back({{"speaker", u.speaker}, {"text", u.text}});
    json line = {{"id", d.id}, {"turns", std::move(turns)}};
    out << line.dump() << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

SpeakerSlots::SpeakerSlots(const Dialogue& dialogue) {
  for (const auto& u : dialogue.utterances) add(u.speaker);
}

std::optional<std::size_t> SpeakerSlots::find(std::string_view speaker) const {
  auto it = std::find(labels_.begin(), labels_.end(), speaker);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t SpeakerSlots::at(std::string_view speaker) const {
  if (auto slot = find(speaker)) return *slot;
  throw EncodingError("speaker '" + std::string(speaker) + "' has no slot");
}

std::size_t SpeakerSlots::add(std::string_view speaker) {
  if (auto slot = find(speaker)) return *slot;
  labels_.emplace_back(speaker);
  return labels_.size() - 1;
}

}  // namespace salm
