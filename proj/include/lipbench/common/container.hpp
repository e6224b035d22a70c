#pragma once

#include <string>

#include "lipbench/common/json_util.hpp"

namespace lipbench {

/// Single-file container shared by datasets and checkpoints:
///
///   <magic> <version>\n
///   <header JSON on one line>\n
///   <payload bytes>
///
/// The header carries `payload_bytes` and a `payload_fnv1a64` checksum so that
/// truncation and corruption are detected before the payload is decoded.
struct Container {
  Json header;
  std::string payload;
};

void write_container(const std::string& path, const std::string& magic, int version, Json header,
                     const std::string& payload);
/// Throws DataError naming the failure (missing file, wrong magic, version
/// mismatch, bad header, truncated payload, checksum mismatch).
Container read_container(const std::string& path, const std::string& magic, int version);

}  // namespace lipbench
