#pragma once

#include <string>

#include <json.hpp>

#include "seea/params.hpp"

namespace seea {

// Checkpoint file layout (all integers little-endian):
//   bytes 0..3   magic "SEEA"
//   bytes 4..7   format version (u32)
//   bytes 8..11  header length in bytes (u32)
//   then         UTF-8 JSON header
//   then         raw tensor data, contiguous, at the offsets the header
//                declares (relative to the start of the data section)
//
// The JSON header holds {"config": <snapshot>, "tensors": [{name, dtype,
// shape, trainable, byte_offset, byte_length}, ...]} in store order.

inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const ParameterStore<T>& params, const nlohmann::ordered_json& config,
                     const std::string& path);

template <typename T>
struct LoadedCheckpoint {
  ParameterStore<T> params;
  nlohmann::ordered_json config;
};

/// Validates magic, version, header integrity and the declared byte extents
/// (a truncated or padded file is rejected) before reading tensor data.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path);

}  // namespace seea
