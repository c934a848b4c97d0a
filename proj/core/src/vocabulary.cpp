#include "salm/vocabulary.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include <zlib.h>

#include <json.hpp>

#include "salm/error.hpp"

namespace salm {

using nlohmann::json;

namespace {
constexpr std::array<const char*, Vocabulary::kReservedCount> kReservedNames = {
    "<pad>", "<bos>", "<eos>", "<unk>"};
constexpr std::array<const char*, Vocabulary::kReservedCount> kReservedKeys = {"pad", "bos", "eos",
                                                                                "unk"};

bool is_reserved_string(std::string_view s) {
  return std::find(kReservedNames.begin(), kReservedNames.end(), s) != kReservedNames.end();
}

bool looks_like_speaker_token(std::string_view s) {
  if (s.size() < 4 || s.substr(0, 2) != "[S" || s.back() != ']') return false;
  auto digits = s.substr(2, s.size() - 3);
  return std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; });
}
}  // namespace

std::string Vocabulary::speaker_token_string(std::size_t slot) {
  return "[S" + std::to_string(slot) + "]";
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::size_t speaker_slots)
    : speaker_slots_(speaker_slots) {
  tokens_.reserve(kReservedCount + speaker_slots + words.size());
  for (const char* name : kReservedNames) tokens_.emplace_back(name);
  for (std::size_t k = 0; k < speaker_slots; ++k) tokens_.push_back(speaker_token_string(k));
  for (auto& w : words) {
    if (w.empty() || is_reserved_string(w) || looks_like_speaker_token(w))
      throw ValidationError(0, "word '" + w + "' collides with a control token");
    tokens_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw ValidationError(0, "duplicate token '" + tokens_[i] + "'");
  }
}

TokenId Vocabulary::speaker_token(std::size_t slot) const {
  if (slot >= speaker_slots_)
    throw EncodingError("speaker slot " + std::to_string(slot) + " exceeds the " +
                        std::to_string(speaker_slots_) + " slots in the vocabulary");
  return static_cast<TokenId>(kReservedCount + slot);
}

std::optional<std::size_t> Vocabulary::speaker_slot_of(TokenId id) const {
  if (id < static_cast<TokenId>(kReservedCount)) return std::nullopt;
  auto slot = static_cast<std::size_t>(id) - kReservedCount;
  if (slot >= speaker_slots_) return std::nullopt;
  return slot;
}

bool Vocabulary::is_word(TokenId id) const {
  return id >= static_cast<TokenId>(kReservedCount + speaker_slots_) &&
         id < static_cast<TokenId>(tokens_.size());
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::word_id(std::string_view word) const {
  auto id = find(word);
  if (!id || !is_word(*id)) return kUnk;
  return *id;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

std::string Vocabulary::decode_words(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id < static_cast<TokenId>(kReservedCount)) {
      token(id);
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

std::string Vocabulary::digest() const {
  uLong crc = crc32(0L, Z_NULL, 0);
  auto feed = [&](const std::string& s) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
    const Bytef sep = '\n';
    crc = crc32(crc, &sep, 1);
  };
  feed(std::to_string(speaker_slots_));
  for (const auto& t : tokens_) feed(t);
  std::ostringstream os;
  os << std::hex;
  os.width(8);
  os.fill('0');
  os << static_cast<std::uint32_t>(crc);
  return os.str();
}

std::string Vocabulary::to_json() const {
  json reserved = json::object();
  for (std::size_t i = 0; i < kReservedCount; ++i) reserved[kReservedKeys[i]] = i;
  json j = {{"tokens", tokens_}, {"reserved", reserved}, {"speaker_slots", speaker_slots_}};
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("vocabulary: ") + e.what());
  }
  if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array() ||
      !j.contains("speaker_slots") || !j["speaker_slots"].is_number_unsigned())
    throw ValidationError(0, "vocabulary: expected {\"tokens\": [...], \"speaker_slots\": k}");
  auto tokens = j["tokens"].get<std::vector<std::string>>();
  auto slots = j["speaker_slots"].get<std::size_t>();
  if (tokens.size() < kReservedCount + slots)
    throw ValidationError(0, "vocabulary: token list shorter than reserved + speaker tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != kReservedNames[i])
      throw ValidationError(0, "vocabulary: reserved token " + std::to_string(i) + " must be " +
                                   kReservedNames[i]);
  }
  if (j.contains("reserved")) {
    const auto& r = j["reserved"];
    for (std::size_t i = 0; i < kReservedCount; ++i) {
      if (!r.contains(kReservedKeys[i]) || r[kReservedKeys[i]] != i)
        throw ValidationError(0, std::string("vocabulary: reserved index for ") +
                                     kReservedKeys[i] + " must be " + std::to_string(i));
    }
  }
  for (std::size_t k = 0; k < slots; ++k) {
    if (tokens[kReservedCount + k] != speaker_token_string(k))
      throw ValidationError(0, "vocabulary: expected speaker token " + speaker_token_string(k));
  }
  std::vector<std::string> words(tokens.begin() + static_cast<std::ptrdiff_t>(kReservedCount + slots),
                                 tokens.end());
  return Vocabulary(std::move(words), slots);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary '" + path.string() + "'");
  out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Vocabulary build_vocabulary(std::span<const Dialogue> dialogues, std::size_t min_count,
                            std::size_t max_speaker_slots) {
  if (dialogues.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  if (min_count == 0) throw ConfigError("min_count must be positive");
  if (max_speaker_slots == 0) throw ConfigError("max_speaker_slots must be positive");
  std::size_t most_speakers = 0;
  std::map<std::string, std::size_t> counts;
  for (const auto& d : dialogues) {
    most_speakers = std::max(most_speakers, d.speaker_count());
    for (const auto& u : d.utterances)
      for (auto& w : tokenize(u.text)) ++counts[std::move(w)];
  }
  if (most_speakers > max_speaker_slots)
    throw ConfigError("a dialogue has " + std::to_string(most_speakers) +
                      " speakers but only " + std::to_string(max_speaker_slots) +
                      " speaker slots are configured");
  std::vector<std::string> words;
  for (auto& [w, c] : counts) {
    if (c < min_count || is_reserved_string(w) || looks_like_speaker_token(w)) continue;
    words.push_back(w);
  }
  return Vocabulary(std::move(words), max_speaker_slots);
}

}  // namespace salm
