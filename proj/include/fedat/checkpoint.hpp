#pragma once

#include <filesystem>
#include <string>

#include "fedat/nn.hpp"

namespace fedat {

/// A parameter-shaped array tagged with the model it belongs to. `tensor`
/// names the content ("params", "fisher", ...).
struct Checkpoint {
  ModelSpec spec;
  ParamVector values;
  std::string tensor = "params";
};

/// File layout: one line "FEDAT-CKPT 1", one line of JSON header (spec,
/// layout manifest, tensor name, count), then `count` little-endian float64.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Writes `contents` to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace fedat
