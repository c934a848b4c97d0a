#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "salm/trainer.hpp"

namespace salm {

// File layout, all integers little-endian:
//
//   "SALMCKPT"                   8-byte magic
//   u32  format version
//   u64  header length H
//   H    bytes of JSON header: configs, epoch, optimizer step, vocabulary
//        digest, and one {name, shape, offset} entry per f64 tensor
//   ...  tensor payload (params, then first and second moments)
//   u32  CRC-32 of every preceding byte

std::string serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws IntegrityError on truncation, bad magic, checksum or layout
/// mismatch, and VersionError for an unsupported format version.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace salm
