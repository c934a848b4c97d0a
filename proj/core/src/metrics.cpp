#include "salm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "salm/error.hpp"

namespace salm {

using nlohmann::json;

namespace {

std::string ngram_key(std::span<const std::string> tokens, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[start + i];
  }
  return key;
}

std::map<std::string, std::size_t> ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

void check_corpus(std::span<const TokenList> candidates, std::span<const TokenList> references) {
  if (candidates.empty()) throw MetricError("metric is undefined on an empty corpus");
  if (candidates.size() != references.size())
    throw MetricError("candidate and reference lists differ in length");
}

}  // namespace

double bleu(std::span<const TokenList> candidates, std::span<const TokenList> references,
            int max_n) {
  check_corpus(candidates, references);
  if (max_n < 1 || max_n > 3) throw MetricError("BLEU order must be 1, 2 or 3");

  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
  }
  if (cand_len == 0) return 0.0;

  double log_precision = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    std::size_t matches = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto cand = ngram_counts(candidates[i], static_cast<std::size_t>(n));
      const auto ref = ngram_counts(references[i], static_cast<std::size_t>(n));
      for (const auto& [gram, count] : cand) {
        total += count;
        if (auto it = ref.find(gram); it != ref.end()) matches += std::min(count, it->second);
      }
    }
    double p;
    if (matches > 0) {
      p = static_cast<double>(matches) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(total + 1);
    }
    log_precision += std::log(p);
  }
  const double bp = std::exp(std::min(
      0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return 100.0 * bp * std::exp(log_precision / max_n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const TokenList> candidates, std::span<const TokenList> references) {
  check_corpus(candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& r = references[i];
    const double lcs = static_cast<double>(lcs_length(c, r));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(c.size());
    const double rec = lcs / static_cast<double>(r.size());
    sum += 2.0 * p * rec / (p + rec);
  }
  return 100.0 * sum / static_cast<double>(candidates.size());
}

double distinct_n(std::span<const TokenList> responses, int n) {
  if (n < 1 || n > 2) throw MetricError("distinct-n order must be 1 or 2");
  std::set<std::string> unique;
  std::size_t total = 0;
  const auto width = static_cast<std::size_t>(n);
  for (const auto& r : responses) {
    if (r.size() < width) continue;
    for (std::size_t i = 0; i + width <= r.size(); ++i) {
      unique.insert(ngram_key(r, i, width));
      ++total;
    }
  }
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(unique.size()) / static_cast<double>(total);
}

std::vector<Prediction> parse_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.dialogue_id = j.at("dialogue_id").get<std::string>();
      p.target_index = j.at("target_index").get<std::size_t>();
      p.candidate = j.at("candidate").get<std::string>();
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("prediction: ") + e.what());
    }
  }
  return out;
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  for (const auto& p : predictions) {
    json j = {{"dialogue_id", p.dialogue_id},
              {"target_index", p.target_index},
              {"candidate", p.candidate}};
    out << j.dump() << '\n';
  }
}

namespace {
std::unordered_map<std::string_view, const Dialogue*> index_corpus(std::span<const Dialogue> corpus) {
  std::unordered_map<std::string_view, const Dialogue*> by_id;
  for (const auto& d : corpus) by_id.emplace(d.id, &d);
  return by_id;
}
}  // namespace

std::vector<EvalPair> make_eval_pairs(std::span<const Prediction> predictions,
                                      std::span<const Dialogue> corpus) {
  const auto by_id = index_corpus(corpus);
  std::vector<EvalPair> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    auto it = by_id.find(p.dialogue_id);
    if (it == by_id.end())
      throw ReferenceError("prediction refers to unknown dialogue '" + p.dialogue_id + "'");
    const Dialogue& d = *it->second;
    if (p.target_index >= d.utterances.size())
      throw ReferenceError("prediction refers to utterance " + std::to_string(p.target_index) +
                           " of dialogue '" + d.id + "', which has " +
                           std::to_string(d.utterances.size()));
    const auto& gold = d.utterances[p.target_index];
    out.push_back({d.id, p.target_index, p.target_index, gold.speaker, tokenize(p.candidate),
                   tokenize(gold.text)});
  }
  return out;
}

SpeakerRole speaker_role(const Dialogue& dialogue, std::string_view speaker) {
  // count > n / k without leaving integers
  const std::size_t count = dialogue.utterances_by(speaker);
  return count * dialogue.speaker_count() > dialogue.utterances.size() ? SpeakerRole::kFrequent
                                                                       : SpeakerRole::kInfrequent;
}

ContextBucket context_bucket(std::size_t n) {
  if (n < 10) return ContextBucket::kShort;
  if (n <= 20) return ContextBucket::kMedium;
  return ContextBucket::kLong;
}

std::string_view to_string(SpeakerRole role) {
  return role == SpeakerRole::kFrequent ? "frequent" : "infrequent";
}

std::string_view to_string(ContextBucket bucket) {
  switch (bucket) {
    case ContextBucket::kShort: return "short";
    case ContextBucket::kMedium: return "medium";
    case ContextBucket::kLong: return "long";
  }
  return "?";
}

SpeakerPartition stratify_speaker_roles(std::span<const Dialogue> corpus,
                                        std::span<const EvalPair> pairs) {
  const auto by_id = index_corpus(corpus);
  SpeakerPartition out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = by_id.find(pairs[i].dialogue_id);
    if (it == by_id.end())
      throw ReferenceError("unknown dialogue '" + pairs[i].dialogue_id + "'");
    if (it->second->utterances_by(pairs[i].responder) == 0)
      throw ReferenceError("speaker '" + pairs[i].responder + "' does not appear in dialogue '" +
                           pairs[i].dialogue_id + "'");
    if (speaker_role(*it->second, pairs[i].responder) == SpeakerRole::kFrequent)
      out.frequent.push_back(i);
    else
      out.infrequent.push_back(i);
  }
  return out;
}

ContextPartition stratify_context_length(std::span<const EvalPair> pairs) {
  ContextPartition out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    switch (context_bucket(pairs[i].context_length)) {
      case ContextBucket::kShort: out.short_context.push_back(i); break;
      case ContextBucket::kMedium: out.medium_context.push_back(i); break;
      case ContextBucket::kLong: out.long_context.push_back(i); break;
    }
  }
  return out;
}

MetricValues compute_metrics(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw MetricError("metric is undefined on an empty corpus");
  std::vector<TokenList> cands, refs;
  cands.reserve(pairs.size());
  refs.reserve(pairs.size());
  for (const auto& p : pairs) {
    cands.push_back(p.candidate);
    refs.push_back(p.reference);
  }
  MetricValues v;
  v.bleu1 = bleu(cands, refs, 1);
  v.bleu2 = bleu(cands, refs, 2);
  v.bleu3 = bleu(cands, refs, 3);
  v.rouge_l = rouge_l(cands, refs);
  v.distinct1 = distinct_n(cands, 1);
  v.distinct2 = distinct_n(cands, 2);
  return v;
}

Strata parse_strata(std::string_view name) {
  if (name == "none") return Strata::kNone;
  if (name == "speaker") return Strata::kSpeaker;
  if (name == "context") return Strata::kContext;
  throw ConfigError("unknown strata '" + std::string(name) + "' (expected speaker|context|none)");
}

namespace {
MetricReport report_for(std::string stratum, std::span<const EvalPair> pairs,
                        const std::vector<std::size_t>& members) {
  MetricReport r{std::move(stratum), members.size(), std::nullopt};
  if (members.empty()) return r;
  std::vector<EvalPair> subset;
  subset.reserve(members.size());
  for (std::size_t i : members) subset.push_back(pairs[i]);
  r.metrics = compute_metrics(subset);
  return r;
}
}  // namespace

std::vector<MetricReport> build_report(std::span<const Prediction> predictions,
                                       std::span<const Dialogue> corpus, Strata strata) {
  const auto pairs = make_eval_pairs(predictions, corpus);
  std::vector<std::size_t> all(pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::vector<MetricReport> rows;
  rows.push_back(report_for("overall", pairs, all));
  if (strata == Strata::kSpeaker) {
    const auto part = stratify_speaker_roles(corpus, pairs);
    rows.push_back(report_for("frequent", pairs, part.frequent));
    rows.push_back(report_for("infrequent", pairs, part.infrequent));
  } else if (strata == Strata::kContext) {
    const auto part = stratify_context_length(pairs);
    rows.push_back(report_for("short", pairs, part.short_context));
    rows.push_back(report_for("medium", pairs, part.medium_context));
    rows.push_back(report_for("long", pairs, part.long_context));
  }
  return rows;
}

void write_report_csv(std::ostream& out, std::span<const MetricReport> rows) {
  out << "stratum,count,B-1,B-2,B-3,R-L,D-1,D-2\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << r.stratum << ',' << r.count;
    if (r.metrics) {
      const auto& m = *r.metrics;
      out << ',' << m.bleu1 << ',' << m.bleu2 << ',' << m.bleu3 << ',' << m.rouge_l << ','
          << m.distinct1 << ',' << m.distinct2;
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

std::string format_report_table(std::span<const MetricReport> rows) {
  std::ostringstream os;
  os << "# " << kBleuSmoothingNote << "\n";
  os << std::left << std::setw(12) << "stratum" << std::right << std::setw(7) << "count";
  for (const char* h : {"B-1", "B-2", "B-3", "R-L", "D-1", "D-2"}) os << std::setw(8) << h;
  os << '\n' << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.stratum << std::right << std::setw(7) << r.count;
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (double v : {m.bleu1, m.bleu2, m.bleu3, m.rouge_l, m.distinct1, m.distinct2})
        os << std::setw(8) << v;
    } else {
      for (int i = 0; i < 6; ++i) os << std::setw(8) << "-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace salm
