#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "salm/trainer.hpp"

namespace salm {

/// Training configuration as `key = value` lines. `#` starts a comment.
///
/// Keys: learning_rate beta1 beta2 epsilon grad_clip_norm (number or `none`)
/// batch_size epochs seed margin lambda_weight length_normalize_score
/// contrastive d_model n_heads n_layers d_ff max_seq_len init_seed min_count
/// speaker_slots min_context. `init_seed` defaults to `seed`.
TrainConfig parse_train_config(std::istream& in);

struct Setting {
  std::string key;
  std::string value;
  /// Prefix for error messages, e.g. "config line 3" or "--set".
  std::string origin;
};

/// Reads `key = value` lines without interpreting them.
std::vector<Setting> read_settings(std::istream& in);
/// Applies `settings` in order over the defaults, except that `init_seed` is
/// applied last so it wins over `seed` wherever it appears. Validates the
/// result.
TrainConfig resolve_train_config(std::span<const Setting> settings);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Applies one `key=value` override. Throws ConfigError for unknown keys or
/// unparsable values.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

/// Writes every key with round-trip precision.
std::string format_train_config(const TrainConfig& config);

std::vector<std::string> train_config_keys();

}  // namespace salm
