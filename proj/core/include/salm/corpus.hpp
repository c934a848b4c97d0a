#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace salm {

/// One speaker-attributed turn. `speaker` is a label without whitespace or
/// square brackets; `text` is non-empty after trimming.
struct Utterance {
  std::string speaker;
  std::string text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// An ordered multi-party conversation with at least two turns.
struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t speaker_count() const;
  /// Number of utterances contributed by `speaker`.
  std::size_t utterances_by(std::string_view speaker) const;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

struct ParseOptions {
  /// Downgrade single-speaker dialogues from errors to warnings.
  bool lenient = false;
};

struct CorpusIssue {
  std::size_t line = 0;
  std::string dialogue_id;
  std::string message;
};

/// Result of a full pass over a corpus that keeps going after errors.
struct ValidationReport {
  std::vector<Dialogue> dialogues;
  std::vector<CorpusIssue> errors;
  std::vector<CorpusIssue> warnings;

  bool ok() const { return errors.empty(); }
  std::size_t utterance_count() const;
  std::size_t distinct_speaker_count() const;
};

/// Scans a JSON Lines corpus and records every violation instead of stopping
/// at the first one. Blank lines are skipped.
ValidationReport validate_corpus(std::istream& in, const ParseOptions& options = {});

/// Parses a JSON Lines corpus. Each line is
/// `{"id": str, "turns": [{"speaker": str, "text": str}, ...]}`.
/// Throws ParseError on malformed JSON and ValidationError on contract
/// violations, both carrying the 1-based line number.
std::vector<Dialogue> parse_corpus(std::istream& in, const ParseOptions& options = {},
                                   std::vector<CorpusIssue>* warnings = nullptr);

/// Throws IoError when the file cannot be opened.
std::vector<Dialogue> load_corpus(const std::filesystem::path& path,
                                  const ParseOptions& options = {});

void write_corpus(std::ostream& out, std::span<const Dialogue> dialogues);

/// Lowercased whitespace tokenization.
std::vector<std::string> tokenize(std::string_view text);

bool is_valid_speaker_label(std::string_view label);

/// Per-dialogue speaker slots assigned in order of first appearance.
class SpeakerSlots {
 public:
  SpeakerSlots() = default;
  explicit SpeakerSlots(const Dialogue& dialogue);

  std::optional<std::size_t> find(std::string_view speaker) const;
  /// Throws EncodingError when the speaker has no slot.
  std::size_t at(std::string_view speaker) const;
  /// Returns the existing slot or assigns the next free one.
  std::size_t add(std::string_view speaker);
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

}  // namespace salm
