#pragma once

// Checkpoint file: UTF-8 key-value manifest (model spec + named parameter
// shapes, version "arnckpt-1"), a "---" delimiter line, then the raw
// little-endian IEEE-754 float32 payload in manifest order.

#include <memory>
#include <string>

#include "arn/models.hpp"

namespace arn {

inline constexpr const char* kCheckpointVersion = "arnckpt-1";

void checkpoint_save(Model& model, const std::string& path);

/// Rebuilds the model from the manifest and restores every parameter.
/// Shape or version mismatches and short payloads raise IoError; no partial
/// model is ever returned.
std::unique_ptr<Model> checkpoint_load(const std::string& path);

// Manifest encoding of a ModelSpec, reused by the run configs.
std::string model_spec_to_manifest(const ModelSpec& spec);
ModelSpec model_spec_from_manifest(const std::string& text);

}  // namespace arn
