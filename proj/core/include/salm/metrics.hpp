#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "salm/corpus.hpp"

namespace salm {

using TokenList = std::vector<std::string>;

/// Corpus-level cumulative BLEU-`max_n` (1..3) on a 0-100 scale with a single
/// reference per candidate: geometric mean of clipped n-gram precisions with
/// uniform weights, times the brevity penalty exp(min(0, 1 - r/c)). An order
/// n >= 2 with zero clipped matches uses the add-one precision 1/(c_n + 1),
/// where c_n is the candidate n-gram count; unigram precision is never
/// smoothed. Throws MetricError for an empty corpus or mismatched lists.
double bleu(std::span<const TokenList> candidates, std::span<const TokenList> references,
            int max_n);

/// Mean over pairs of the LCS F1 (P = LCS/|cand|, R = LCS/|ref|), 0-100.
double rouge_l(std::span<const TokenList> candidates, std::span<const TokenList> references);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// 100 * unique n-grams / total n-grams across all responses; 0 when there
/// are no n-grams. `n` must be 1 or 2.
double distinct_n(std::span<const TokenList> responses, int n);

inline constexpr std::string_view kBleuSmoothingNote =
    "BLEU: corpus-level cumulative, uniform weights, brevity penalty exp(min(0,1-r/c)); "
    "zero-match orders n>=2 use precision 1/(c_n+1)";

/// One generated response aligned with its gold utterance.
struct EvalPair {
  std::string dialogue_id;
  std::size_t target_index = 0;
  std::size_t context_length = 0;  ///< utterances preceding the target
  std::string responder;
  TokenList candidate;
  TokenList reference;
};

struct Prediction {
  std::string dialogue_id;
  std::size_t target_index = 0;
  std::string candidate;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// JSON Lines `{"dialogue_id", "target_index", "candidate"}`.
std::vector<Prediction> parse_predictions(std::istream& in);
void write_predictions(std::ostream& out, std::span<const Prediction> predictions);

/// Throws ReferenceError for unknown dialogue ids or target indices.
std::vector<EvalPair> make_eval_pairs(std::span<const Prediction> predictions,
                                      std::span<const Dialogue> corpus);

enum class SpeakerRole { kFrequent, kInfrequent };
enum class ContextBucket { kShort, kMedium, kLong };

/// Frequent iff the speaker has strictly more utterances than the dialogue's
/// mean utterances per speaker.
SpeakerRole speaker_role(const Dialogue& dialogue, std::string_view speaker);

/// Short: < 10 preceding utterances, Medium: 10-20 inclusive, Long: > 20.
ContextBucket context_bucket(std::size_t context_utterances);

std::string_view to_string(SpeakerRole role);
std::string_view to_string(ContextBucket bucket);

struct SpeakerPartition {
  std::vector<std::size_t> frequent;
  std::vector<std::size_t> infrequent;
};

struct ContextPartition {
  std::vector<std::size_t> short_context;
  std::vector<std::size_t> medium_context;
  std::vector<std::size_t> long_context;
};

/// Indices into `pairs`. Throws ReferenceError when a pair's dialogue is not
/// in `corpus` or its responder does not speak in it.
SpeakerPartition stratify_speaker_roles(std::span<const Dialogue> corpus,
                                        std::span<const EvalPair> pairs);
ContextPartition stratify_context_length(std::span<const EvalPair> pairs);

struct MetricValues {
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0;
  double rouge_l = 0.0;
  double distinct1 = 0.0, distinct2 = 0.0;
};

struct MetricReport {
  std::string stratum;
  std::size_t count = 0;
  std::optional<MetricValues> metrics;  ///< absent for an empty stratum
};

/// Throws MetricError for an empty set.
MetricValues compute_metrics(std::span<const EvalPair> pairs);

enum class Strata { kNone, kSpeaker, kContext };

/// Throws ConfigError for anything but "none", "speaker" or "context".
Strata parse_strata(std::string_view name);

/// "overall" first, then one row per stratum of the selected partition.
std::vector<MetricReport> build_report(std::span<const Prediction> predictions,
                                       std::span<const Dialogue> corpus, Strata strata);

/// Columns: stratum,count,B-1,B-2,B-3,R-L,D-1,D-2. Absent metrics are empty.
void write_report_csv(std::ostream& out, std::span<const MetricReport> rows);
std::string format_report_table(std::span<const MetricReport> rows);

}  // namespace salm
