#include "salm/config_file.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "salm/error.hpp"

namespace salm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" +
                      std::string(v) + "'");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false, got '" + std::string(v) + "'");
}

std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

using Setter = std::function<void(TrainConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const TrainConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add = [&t](std::string name, Setter s, Getter g) { t.emplace_back(std::move(name), Field{std::move(s), std::move(g)}); };
    add("learning_rate", [](TrainConfig& c, auto k, auto v) { c.adam.learning_rate = to_double(k, v); },
        [](const TrainConfig& c) { return fmt_double(c.adam.learning_rate); });
    add("beta1", [](TrainConfig& c, auto k, auto v) { c.adam.beta1 = to_double(k, v); },
        [](const TrainConfig& c) { return fmt_double(c.adam.beta1); });
    add("beta2", [](TrainConfig& c, auto k, auto v) { c.adam.beta2 = to_double(k, v); },
        [](const TrainConfig& c) { return fmt_double(c.adam.beta2); });
    add("epsilon", [](TrainConfig& c, auto k, auto v) { c.adam.epsilon = to_double(k, v); },
        [](const TrainConfig& c) { return fmt_double(c.adam.epsilon); });
    add("grad_clip_norm",
        [](TrainConfig& c, auto k, auto v) {
          if (v == "none") c.adam.grad_clip_norm.reset();
          else c.adam.grad_clip_norm = to_double(k, v);
        },
        [](const TrainConfig& c) {
          return c.adam.grad_clip_norm ? fmt_double(*c.adam.grad_clip_norm) : std::string("none");
        });
    add("batch_size", [](TrainConfig& c, auto k, auto v) { c.batch_size = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.batch_size); });
    add("epochs", [](TrainConfig& c, auto k, auto v) { c.epochs = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.epochs); });
    add("seed",
        [](TrainConfig& c, auto k, auto v) {
          c.seed = to_u64(k, v);
          c.model.seed = c.seed;
        },
        [](const TrainConfig& c) { return std::to_string(c.seed); });
    add("init_seed", [](TrainConfig& c, auto k, auto v) { c.model.seed = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.model.seed); });
    add("margin", [](TrainConfig& c, auto k, auto v) { c.objective.margin = to_double(k, v); },
        [](const TrainConfig& c) { return fmt_double(c.objective.margin); });
    add("lambda_weight", [](TrainConfig& c, auto k, auto v) { c.objective.lambda_weight = to_double(k, v); },
        [](const TrainConfig& c) { return fmt_double(c.objective.lambda_weight); });
    add("length_normalize_score",
        [](TrainConfig& c, auto k, auto v) { c.objective.length_normalize_score = to_bool(k, v); },
        [](const TrainConfig& c) { return std::string(c.objective.length_normalize_score ? "true" : "false"); });
    add("contrastive", [](TrainConfig& c, auto k, auto v) { c.contrastive_enabled = to_bool(k, v); },
        [](const TrainConfig& c) { return std::string(c.contrastive_enabled ? "true" : "false"); });
    add("d_model", [](TrainConfig& c, auto k, auto v) { c.model.d_model = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.model.d_model); });
    add("n_heads", [](TrainConfig& c, auto k, auto v) { c.model.n_heads = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.model.n_heads); });
    add("n_layers", [](TrainConfig& c, auto k, auto v) { c.model.n_layers = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.model.n_layers); });
    add("d_ff", [](TrainConfig& c, auto k, auto v) { c.model.d_ff = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.model.d_ff); });
    add("max_seq_len", [](TrainConfig& c, auto k, auto v) { c.model.max_seq_len = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.model.max_seq_len); });
    add("min_count", [](TrainConfig& c, auto k, auto v) { c.data.min_count = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.data.min_count); });
    add("speaker_slots", [](TrainConfig& c, auto k, auto v) { c.data.speaker_slots = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.data.speaker_slots); });
    add("min_context", [](TrainConfig& c, auto k, auto v) { c.data.min_context = to_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.data.min_context); });
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> train_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void apply_setting(TrainConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& [k, f] : fields()) {
    if (k == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

TrainConfig resolve_train_config(std::span<const Setting> settings) {
  TrainConfig config;
  const Setting* init_seed = nullptr;
  auto apply = [&config](const Setting& s) {
    try {
      apply_setting(config, s.key, s.value);
    } catch (const ConfigError& e) {
      throw ConfigError(s.origin.empty() ? std::string(e.what()) : s.origin + ": " + e.what());
    }
  };
  for (const auto& s : settings) {
    if (trim(s.key) == "init_seed") init_seed = &s;
    else apply(s);
  }
  if (init_seed) apply(*init_seed);
  config.validate();
  return config;
}

std::vector<Setting> read_settings(std::istream& in) {
  std::vector<Setting> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    const std::string origin = "config line " + std::to_string(lineno);
    if (eq == std::string_view::npos) throw ConfigError(origin + ": expected key = value");
    out.push_back({std::string(trim(view.substr(0, eq))), std::string(trim(view.substr(eq + 1))), origin});
  }
  return out;
}

TrainConfig parse_train_config(std::istream& in) { return resolve_train_config(read_settings(in)); }

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse_train_config(in);
}

std::string format_train_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace salm
