#pragma once

#include <concepts>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "sbd/model/params.hpp"

// Checkpoint layout:
//   "SBD1" | u64 little-endian header length | UTF-8 JSON header | payloads
// The header holds the model config, the dtype, a tensor manifest (name,
// shape, dtype, offset, nbytes; offsets relative to the payload start) and a
// free-form "meta" object. Payloads are raw little-endian floats.
namespace sbd {

template <std::floating_point T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params,
                     const nlohmann::json& meta = nlohmann::json::object());

// Loads into precision T, converting if the file was saved in the other one.
template <std::floating_point T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

// Header only; cheap way to inspect config and meta.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace sbd
