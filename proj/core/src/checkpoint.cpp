#include "salm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include <json.hpp>

#include "salm/config_file.hpp"
#include "salm/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host byte order and assumes little-endian");

namespace salm {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'A', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPreamble = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::uint32_t checksum(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths
  while (!bytes.empty()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size(), 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), chunk);
    bytes.remove_prefix(chunk);
  }
  return static_cast<std::uint32_t>(crc);
}

json model_to_json(const ModelConfig& m) {
  return {{"vocab_size", m.vocab_size}, {"d_model", m.d_model},     {"n_heads", m.n_heads},
          {"n_layers", m.n_layers},     {"d_ff", m.d_ff},           {"max_seq_len", m.max_seq_len},
          {"seed", m.seed}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.vocab_size = j.at("vocab_size").get<std::size_t>();
  m.d_model = j.at("d_model").get<std::size_t>();
  m.n_heads = j.at("n_heads").get<std::size_t>();
  m.n_layers = j.at("n_layers").get<std::size_t>();
  m.d_ff = j.at("d_ff").get<std::size_t>();
  m.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

template <typename C>
auto all_tensors(C& ckpt) {
  using Ptr = std::conditional_t<std::is_const_v<C>, const Matrix*, Matrix*>;
  std::vector<std::pair<std::string, Ptr>> out;
  for (auto& [n, t] : ckpt.params.tensors()) out.emplace_back("params/" + n, t);
  for (auto& [n, t] : ckpt.optimizer.first_moment.tensors()) out.emplace_back("adam_m/" + n, t);
  for (auto& [n, t] : ckpt.optimizer.second_moment.tensors()) out.emplace_back("adam_v/" + n, t);
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  const auto list = all_tensors(c);
  for (const auto& [name, t] : list) {
    tensors.push_back({{"name", name}, {"shape", {t->rows(), t->cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t->size()) * sizeof(double);
  }
  json header = {{"format_version", c.version},
                 {"dtype", "f64"},
                 {"byte_order", "little"},
                 {"model_config", model_to_json(c.model)},
                 {"train_config", format_train_config(c.train)},
                 {"train_model_config", model_to_json(c.train.model)},
                 {"epoch", c.epoch},
                 {"optimizer_step", c.optimizer.step},
                 {"vocab_digest", c.vocab_digest},
                 {"payload_bytes", offset},
                 {"tensors", tensors}};
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(kPreamble + header_text.size() + offset + sizeof(std::uint32_t));
  out.append(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, c.version);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& [name, t] : list)
    out.append(reinterpret_cast<const char*>(t->data()),
               static_cast<std::size_t>(t->size()) * sizeof(double));
  put<std::uint32_t>(out, checksum(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kPreamble + sizeof(std::uint32_t))
    throw IntegrityError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IntegrityError("not a checkpoint file (bad magic)");
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  if (get<std::uint32_t>(bytes, body) != checksum(bytes.substr(0, body)))
    throw IntegrityError("checkpoint checksum mismatch (corrupt or truncated file)");
  const auto version = get<std::uint32_t>(bytes, sizeof kMagic);
  if (version != Checkpoint::kFormatVersion)
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(Checkpoint::kFormatVersion) + ")");
  const auto header_len = get<std::uint64_t>(bytes, sizeof kMagic + sizeof(std::uint32_t));
  if (header_len > body - kPreamble) throw IntegrityError("checkpoint header length out of range");

  Checkpoint c;
  std::size_t payload_start = 0;
  try {
    const json header = json::parse(bytes.substr(kPreamble, header_len));
    c.version = version;
    c.model = model_from_json(header.at("model_config"));
    std::istringstream train_text(header.at("train_config").get<std::string>());
    c.train = parse_train_config(train_text);
    c.train.model = model_from_json(header.at("train_model_config"));
    c.epoch = header.at("epoch").get<std::uint64_t>();
    c.optimizer.step = header.at("optimizer_step").get<std::uint64_t>();
    c.vocab_digest = header.at("vocab_digest").get<std::string>();
    c.model.validate();
    c.params = Parameters::zeros(c.model);
    c.optimizer.first_moment = Parameters::zeros(c.model);
    c.optimizer.second_moment = Parameters::zeros(c.model);

    payload_start = kPreamble + header_len;
    const auto payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
    if (payload_start + payload_bytes != body)
      throw IntegrityError("checkpoint payload size does not match its header");
    const auto& entries = header.at("tensors");
    auto list = all_tensors(c);
    if (entries.size() != list.size())
      throw IntegrityError("checkpoint tensor count does not match the model config");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& e = entries[i];
      auto& [name, t] = list[i];
      const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
      if (e.at("name").get<std::string>() != name || shape.size() != 2 || shape[0] != t->rows() ||
          shape[1] != t->cols())
        throw IntegrityError("checkpoint tensor '" + name + "' does not match the model config");
      const auto offset = e.at("offset").get<std::uint64_t>();
      const std::size_t n = static_cast<std::size_t>(t->size()) * sizeof(double);
      if (offset + n > payload_bytes) throw IntegrityError("tensor '" + name + "' out of bounds");
      std::memcpy(t->data(), bytes.data() + payload_start + offset, n);
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint header is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint carries an invalid config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace salm
