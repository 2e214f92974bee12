#pragma once

// Single JSON document holding every knob of a run. Missing keys take their
// defaults; unknown keys are rejected.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "neurolip/dataset.hpp"
#include "neurolip/model.hpp"
#include "neurolip/preprocess.hpp"
#include "neurolip/trainer.hpp"

namespace neurolip {

struct RunConfig {
  bool denoise_enabled = true;
  DenoiseConfig denoise;
  AugmentConfig augment;
  ModelConfig model;  // num_classes == 0 means "number of subjects in the data"
  TrainConfig train;
  SplitSpec split;

  RunConfig() { model.num_classes = 0; }

  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical text form: two-space indented JSON plus a trailing newline.
std::string config_text(const RunConfig& cfg);

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Hex SHA-1 of `bytes` framed as a git blob, so it matches `git hash-object`.
std::string git_blob_sha1(std::string_view bytes);
std::string git_blob_sha1_file(const std::filesystem::path& path);

}  // namespace neurolip
